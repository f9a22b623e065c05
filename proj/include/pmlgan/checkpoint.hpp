#pragma once

// Binary model checkpoints: all four networks plus, optionally, their Adam
// states. Reloading reproduces every parameter bit for bit. The layout is
// documented in docs/formats.md.

#include <optional>
#include <string>

#include "pmlgan/model.hpp"
#include "pmlgan/train.hpp"

namespace pmlgan::checkpoint {

void save(const std::string& path, const model::PmlGanModel& m,
          const train::AdamSet* opt = nullptr);

struct Loaded {
  model::PmlGanModel model;
  std::optional<train::AdamSet> opt;
};

Loaded load(const std::string& path);

}  // namespace pmlgan::checkpoint
