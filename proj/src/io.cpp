#include "qtthl/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace qtthl {

static_assert(std::endian::native == std::endian::little, "train files are written in host byte order");

namespace {

constexpr char kTrainMagic[8] = {'Q', 'T', 'T', 'H', 'L', 'T', 'T', '1'};
constexpr char kMpoMagic[8] = {'Q', 'T', 'T', 'H', 'L', 'M', 'P', '1'};

template <Scalar T>
constexpr std::uint8_t elem_tag() {
  return is_complex_v<T> ? 1 : 0;
}

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
  }
  template <class V>
  void put(const V& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(V));
  }
  template <Scalar T>
  void put_data(const std::vector<T>& d) {
    out_.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(T)));
  }
  void raw(const char* p, size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed for '" + path_ + "'");
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open '" + path + "'");
  }
  template <class V>
  V get() {
    V v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!in_) throw IoError("truncated file '" + path_ + "'");
    return v;
  }
  template <Scalar T>
  void get_data(std::vector<T>& d) {
    in_.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(T)));
    if (!in_) throw IoError("truncated file '" + path_ + "'");
  }
  void expect_magic(const char* m) {
    char buf[8];
    in_.read(buf, 8);
    if (!in_ || std::memcmp(buf, m, 8) != 0) throw IoError("bad magic in '" + path_ + "'");
  }
  void expect_end() {
    in_.peek();
    if (!in_.eof()) throw IoError("trailing bytes in '" + path_ + "'");
  }

 private:
  std::ifstream in_;
  std::string path_;
};

}  // namespace

template <Scalar T>
void save_train(const std::string& path, const TensorTrain<T>& tt, const std::optional<QttLayout>& lay) {
  tt.validate();
  Writer w(path);
  w.raw(kTrainMagic, 8);
  w.put<std::uint8_t>(elem_tag<T>());
  w.put<std::uint8_t>(lay ? 1 : 0);
  if (lay) {
    w.put<std::int32_t>(lay->d);
    w.put<std::int32_t>(lay->L);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(lay->format));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(lay->space));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(lay->arity));
  }
  w.put<std::uint64_t>(tt.size());
  for (auto n : tt.site_dims()) w.put<std::uint64_t>(static_cast<std::uint64_t>(n));
  for (auto r : tt.ranks()) w.put<std::uint64_t>(static_cast<std::uint64_t>(r));
  for (const auto& c : tt.cores()) w.put_data(c.data);
  w.finish();
}

template <Scalar T>
TensorTrain<T> load_train(const std::string& path, std::optional<QttLayout>* lay) {
  Reader r(path);
  r.expect_magic(kTrainMagic);
  if (r.get<std::uint8_t>() != elem_tag<T>()) throw IoError("element type mismatch in '" + path + "'");
  std::optional<QttLayout> l;
  if (r.get<std::uint8_t>()) {
    QttLayout q;
    q.d = r.get<std::int32_t>();
    q.L = r.get<std::int32_t>();
    q.format = static_cast<Format>(r.get<std::uint8_t>());
    q.space = static_cast<Space>(r.get<std::uint8_t>());
    q.arity = static_cast<Arity>(r.get<std::uint8_t>());
    q.validate();
    l = q;
  }
  const auto K = r.get<std::uint64_t>();
  if (K == 0 || K > 4096) throw IoError("bad site count in '" + path + "'");
  std::vector<Index> dims(K), ranks(K + 1);
  for (auto& n : dims) n = static_cast<Index>(r.get<std::uint64_t>());
  for (auto& x : ranks) x = static_cast<Index>(r.get<std::uint64_t>());
  std::vector<Core<T>> cores;
  for (size_t i = 0; i < K; ++i) {
    Core<T> c(ranks[i], dims[i], ranks[i + 1]);
    r.get_data(c.data);
    cores.push_back(std::move(c));
  }
  r.expect_end();
  TensorTrain<T> tt(std::move(cores));
  tt.validate();
  if (l && tt.site_dims() != l->site_dims()) throw IoError("layout header does not match cores in '" + path + "'");
  if (lay) *lay = l;
  return tt;
}

template <Scalar T>
void save_mpo(const std::string& path, const Mpo<T>& op) {
  op.validate();
  Writer w(path);
  w.raw(kMpoMagic, 8);
  w.put<std::uint8_t>(elem_tag<T>());
  w.put<std::uint64_t>(op.size());
  for (auto n : op.row_dims()) w.put<std::uint64_t>(static_cast<std::uint64_t>(n));
  for (auto n : op.col_dims()) w.put<std::uint64_t>(static_cast<std::uint64_t>(n));
  for (auto r : op.ranks()) w.put<std::uint64_t>(static_cast<std::uint64_t>(r));
  for (const auto& c : op.cores()) w.put_data(c.data);
  w.finish();
}

template <Scalar T>
Mpo<T> load_mpo(const std::string& path) {
  Reader r(path);
  r.expect_magic(kMpoMagic);
  if (r.get<std::uint8_t>() != elem_tag<T>()) throw IoError("element type mismatch in '" + path + "'");
  const auto K = r.get<std::uint64_t>();
  if (K == 0 || K > 4096) throw IoError("bad site count in '" + path + "'");
  std::vector<Index> rows(K), cols(K), ranks(K + 1);
  for (auto& n : rows) n = static_cast<Index>(r.get<std::uint64_t>());
  for (auto& n : cols) n = static_cast<Index>(r.get<std::uint64_t>());
  for (auto& x : ranks) x = static_cast<Index>(r.get<std::uint64_t>());
  std::vector<OpCore<T>> cores;
  for (size_t i = 0; i < K; ++i) {
    OpCore<T> c(ranks[i], rows[i], cols[i], ranks[i + 1]);
    r.get_data(c.data);
    cores.push_back(std::move(c));
  }
  r.expect_end();
  Mpo<T> op(std::move(cores));
  op.validate();
  return op;
}

#define QTTHL_INSTANTIATE_IO(T)                                                                   \
  template void save_train(const std::string&, const TensorTrain<T>&, const std::optional<QttLayout>&); \
  template TensorTrain<T> load_train(const std::string&, std::optional<QttLayout>*);              \
  template void save_mpo(const std::string&, const Mpo<T>&);                                      \
  template Mpo<T> load_mpo(const std::string&);

QTTHL_INSTANTIATE_IO(double)
QTTHL_INSTANTIATE_IO(cplx)

}  // namespace qtthl
