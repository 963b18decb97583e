#include "recsim/snapshot.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "recsim/errors.hpp"

namespace recsim {

namespace {

constexpr std::array<char, 8> kMagic = {'R', 'E', 'C', 'S', 'I', 'M', 'S', 'N'};
constexpr std::uint32_t kKindMf = 1;
constexpr std::uint32_t kKindRnn = 2;
// Refuse absurd sizes from corrupt headers before allocating.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char*>(b), 8);
  }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out_.write(reinterpret_cast<const char*>(b), 4);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

  template <typename M>
  void matrix(const M& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
    }
  }
  void ids(const std::vector<std::int64_t>& v) {
    u64(v.size());
    for (auto x : v) i64(x);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint64_t u64() {
    unsigned char b[8];
    read(b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    read(b, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  std::uint64_t size() {
    const auto n = u64();
    if (n > kMaxElements) throw ParseError(0, "snapshot size field out of range");
    return n;
  }

  template <typename M>
  void matrix(M& m) {
    const auto rows = size();
    const auto cols = size();
    if (rows * cols > kMaxElements) throw ParseError(0, "snapshot matrix too large");
    m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
    }
  }
  void vector(Vector& v) {
    Matrix m;
    matrix(m);
    if (m.cols() != 1) throw ParseError(0, "snapshot vector has more than one column");
    v = m.col(0);
  }
  std::vector<std::int64_t> ids() {
    std::vector<std::int64_t> v(size());
    for (auto& x : v) x = i64();
    return v;
  }

 private:
  void read(unsigned char* dst, std::streamsize n) {
    in_.read(reinterpret_cast<char*>(dst), n);
    if (in_.gcount() != n) throw ParseError(0, "truncated model snapshot");
  }

  std::istream& in_;
};

void header(Writer& w, std::ostream& out, std::uint32_t kind) {
  out.write(kMagic.data(), kMagic.size());
  w.u32(kSnapshotVersion);
  w.u32(kind);
}

}  // namespace

void save_model(std::ostream& out, const MfModel& m) {
  m.validate();
  Writer w(out);
  header(w, out, kKindMf);
  w.u64(m.dim);
  w.f64(m.lambda);
  w.f64(m.global_mean);
  w.ids(m.item_ids);
  w.matrix(m.item_factors);
  w.ids(m.user_ids);
  w.matrix(m.user_factors);
  if (!out) throw Error("failed writing MF snapshot");
}

void save_model(std::ostream& out, const RnnModel& m) {
  m.validate();
  Writer w(out);
  header(w, out, kKindRnn);
  w.u64(m.hidden);
  w.u64(m.dim);
  w.f64(m.lambda);
  w.f64(m.global_mean);
  w.ids(m.item_ids);
  w.matrix(m.item_embeddings);
  w.matrix(m.input_weights);
  w.matrix(m.recurrent_weights);
  w.matrix(Matrix(m.bias));
  w.matrix(m.output_weights);
  if (!out) throw Error("failed writing RNN snapshot");
}

void save_model(std::ostream& out, const ModelSnapshot& model) {
  std::visit([&](const auto& m) { save_model(out, m); }, model);
}

ModelSnapshot load_model(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) || magic != kMagic) {
    throw ParseError(0, "not a model snapshot (bad magic)");
  }
  Reader r(in);
  const auto version = r.u32();
  if (version != kSnapshotVersion) {
    throw ParseError(0, "unsupported snapshot version " + std::to_string(version));
  }
  const auto kind = r.u32();
  try {
    if (kind == kKindMf) {
      MfModel m;
      m.dim = r.size();
      m.lambda = r.f64();
      m.global_mean = r.f64();
      m.item_ids = r.ids();
      r.matrix(m.item_factors);
      m.user_ids = r.ids();
      r.matrix(m.user_factors);
      m.validate();
      return m;
    }
    if (kind == kKindRnn) {
      RnnModel m;
      m.hidden = r.size();
      m.dim = r.size();
      m.lambda = r.f64();
      m.global_mean = r.f64();
      m.item_ids = r.ids();
      r.matrix(m.item_embeddings);
      r.matrix(m.input_weights);
      r.matrix(m.recurrent_weights);
      r.vector(m.bias);
      r.matrix(m.output_weights);
      m.validate();
      return m;
    }
  } catch (const ModelError& e) {
    throw ParseError(0, std::string("corrupt snapshot: ") + e.what());
  }
  throw ParseError(0, "unknown model kind " + std::to_string(kind));
}

void save_model_file(const std::filesystem::path& path, const ModelSnapshot& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write model snapshot '" + path.string() + "'");
  save_model(out, model);
}

ModelSnapshot load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model snapshot '" + path.string() + "'");
  return load_model(in);
}

std::unique_ptr<Recommender> make_recommender(ModelSnapshot model) {
  if (auto* mf = std::get_if<MfModel>(&model)) {
    return std::make_unique<MfRecommender>(std::make_shared<const MfModel>(std::move(*mf)));
  }
  return std::make_unique<RnnRecommender>(
      std::make_shared<const RnnModel>(std::move(std::get<RnnModel>(model))));
}

}  // namespace recsim
