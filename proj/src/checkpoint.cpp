#include "pmlgan/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <variant>

namespace pmlgan::checkpoint {

namespace {

constexpr char kMagic[8] = {'P', 'M', 'L', 'G', 'A', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

enum : std::uint8_t { kTagAffine = 0, kTagActivation = 1, kTagBatchNorm = 2 };

// All integers and doubles are stored little-endian.
void put_u8(std::string& out, std::uint8_t v) {
  out.push_back(static_cast<char>(v));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void put_f64_block(std::string& out, const double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) put_f64(out, p[i]);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw std::runtime_error("checkpoint: truncated file: " + path);
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos++]))
           << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos++]))
           << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void f64_block(double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[i] = f64();
  }
};

void write_network(std::string& out, const nn::Network& net) {
  put_u64(out, net.layers().size());
  for (const nn::Layer& layer : net.layers()) {
    if (const auto* aff = std::get_if<nn::AffineLayer>(&layer)) {
      put_u8(out, kTagAffine);
      put_u64(out, aff->w.rows());
      put_u64(out, aff->w.cols());
      put_u8(out, aff->b.empty() ? 0 : 1);
      put_f64_block(out, aff->w.data(), aff->w.size());
      put_f64_block(out, aff->b.data(), aff->b.size());
    } else if (const auto* act = std::get_if<nn::ActLayer>(&layer)) {
      put_u8(out, kTagActivation);
      put_u8(out, static_cast<std::uint8_t>(act->kind));
      put_f64(out, act->slope);
    } else {
      const auto& bn = std::get<nn::BatchNormLayer>(layer);
      put_u8(out, kTagBatchNorm);
      put_u64(out, bn.gamma.size());
      put_f64_block(out, bn.gamma.data(), bn.gamma.size());
      put_f64_block(out, bn.beta.data(), bn.beta.size());
      put_f64_block(out, bn.running_mean.data(), bn.running_mean.size());
      put_f64_block(out, bn.running_var.data(), bn.running_var.size());
      put_f64(out, bn.momentum);
      put_f64(out, bn.epsilon);
    }
  }
}

nn::Network read_network(Reader& r) {
  nn::Network net;
  Rng scratch(0);  // placeholder weights, overwritten below
  const std::uint64_t layer_count = r.u64();
  for (std::uint64_t k = 0; k < layer_count; ++k) {
    const std::uint8_t tag = r.u8();
    if (tag == kTagAffine) {
      const std::uint64_t in = r.u64();
      const std::uint64_t out = r.u64();
      const std::uint8_t has_bias = r.u8();
      if (in == 0 || out == 0)
        throw std::runtime_error("checkpoint: degenerate affine layer in " +
                                 r.path);
      if (has_bias > 1)
        throw std::runtime_error("checkpoint: bad affine bias flag in " +
                                 r.path);
      net.add_affine(in, out, scratch, has_bias != 0);
      auto& aff = std::get<nn::AffineLayer>(net.layers().back());
      r.f64_block(aff.w.data(), aff.w.size());
      r.f64_block(aff.b.data(), aff.b.size());
    } else if (tag == kTagActivation) {
      const std::uint8_t kind = r.u8();
      const double slope = r.f64();
      if (kind > 3)
        throw std::runtime_error("checkpoint: unknown activation in " +
                                 r.path);
      net.add_activation(static_cast<nn::Act>(kind), slope);
    } else if (tag == kTagBatchNorm) {
      const std::uint64_t width = r.u64();
      net.add_batchnorm();
      auto& bn = std::get<nn::BatchNormLayer>(net.layers().back());
      if (bn.gamma.size() != width)
        throw std::runtime_error(
            "checkpoint: batchnorm width does not match the preceding "
            "layer in " + r.path);
      r.f64_block(bn.gamma.data(), width);
      r.f64_block(bn.beta.data(), width);
      r.f64_block(bn.running_mean.data(), width);
      r.f64_block(bn.running_var.data(), width);
      bn.momentum = r.f64();
      bn.epsilon = r.f64();
    } else {
      throw std::runtime_error("checkpoint: unknown layer tag in " + r.path);
    }
  }
  return net;
}

std::size_t count_param_blocks(const nn::Network& net) {
  std::size_t blocks = 0;
  net.for_each_param([&](std::span<const double>, std::span<const double>) {
    ++blocks;
  });
  return blocks;
}

void write_adam(std::string& out, const nn::AdamState& st) {
  put_f64(out, st.lr);
  put_f64(out, st.beta1);
  put_f64(out, st.beta2);
  put_f64(out, st.eps);
  put_u64(out, static_cast<std::uint64_t>(st.t));
  put_u64(out, st.m.size());
  for (std::size_t b = 0; b < st.m.size(); ++b) {
    put_u64(out, st.m[b].size());
    put_f64_block(out, st.m[b].data(), st.m[b].size());
    put_f64_block(out, st.v[b].data(), st.v[b].size());
  }
}

nn::AdamState read_adam(Reader& r, const nn::Network& net) {
  nn::AdamState st;
  st.lr = r.f64();
  st.beta1 = r.f64();
  st.beta2 = r.f64();
  st.eps = r.f64();
  st.t = static_cast<long long>(r.u64());
  const std::uint64_t blocks = r.u64();
  if (blocks != count_param_blocks(net))
    throw std::runtime_error(
        "checkpoint: optimizer state does not match the network in " +
        r.path);
  st.m.resize(blocks);
  st.v.resize(blocks);
  for (std::uint64_t b = 0; b < blocks; ++b) {
    const std::uint64_t len = r.u64();
    st.m[b].resize(len);
    st.v[b].resize(len);
    r.f64_block(st.m[b].data(), len);
    r.f64_block(st.v[b].data(), len);
  }
  return st;
}

}  // namespace

void save(const std::string& path, const model::PmlGanModel& m,
          const train::AdamSet* opt) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_f64(out, m.beta);
  put_u64(out, m.feature_dim);
  put_u64(out, m.label_dim);
  write_network(out, m.predictor);
  write_network(out, m.disambiguator);
  write_network(out, m.generator);
  write_network(out, m.discriminator);
  put_u8(out, opt ? 1 : 0);
  if (opt) {
    write_adam(out, opt->predictor);
    write_adam(out, opt->disambiguator);
    write_adam(out, opt->generator);
    write_adam(out, opt->discriminator);
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  if (!f) throw std::runtime_error("failed writing checkpoint: " + path);
}

Loaded load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string buf = ss.str();
  Reader r{buf, 0, path};

  r.need(sizeof(kMagic));
  if (buf.compare(0, sizeof(kMagic), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  r.pos = sizeof(kMagic);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version) + " in " + path);

  Loaded loaded;
  loaded.model.beta = r.f64();
  loaded.model.feature_dim = r.u64();
  loaded.model.label_dim = r.u64();
  loaded.model.predictor = read_network(r);
  loaded.model.disambiguator = read_network(r);
  loaded.model.generator = read_network(r);
  loaded.model.discriminator = read_network(r);
  const std::uint8_t has_opt = r.u8();
  if (has_opt > 1)
    throw std::runtime_error("checkpoint: bad optimizer flag in " + path);
  if (has_opt) {
    train::AdamSet opt;
    opt.predictor = read_adam(r, loaded.model.predictor);
    opt.disambiguator = read_adam(r, loaded.model.disambiguator);
    opt.generator = read_adam(r, loaded.model.generator);
    opt.discriminator = read_adam(r, loaded.model.discriminator);
    loaded.opt = std::move(opt);
  }
  if (r.pos != buf.size())
    throw std::runtime_error("checkpoint: trailing bytes in " + path);
  return loaded;
}

}  // namespace pmlgan::checkpoint
