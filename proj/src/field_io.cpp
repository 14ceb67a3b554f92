#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "stripeforge/core.hpp"

// Binary layout: "SFFIELD1", int32 d, int32 N, float64 L, tau, eps, p, then
// N^d float64 samples, all little-endian.  CSV: one header line
// "# stripeforge-field d=.. N=.. L=.. tau=.. eps=.. p=..", then N^(d-1) rows of
// N comma-separated values.

namespace sf {
namespace {

constexpr char kMagic[8] = {'S', 'F', 'F', 'I', 'E', 'L', 'D', '1'};

template <class T>
void put_le(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
bool get_le(std::istream& is, T& v) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  std::memcpy(&v, b, sizeof(T));
  return true;
}

Params header_params(int d, int N, double L, double tau, double eps, double p) {
  try {
    if (N < 1) throw InputError("N", "N must be positive");
    return make_params(d, p, tau, eps, L, N / L);
  } catch (const InputError& e) {
    throw FieldFormatError(-1, fmt::format("malformed header: {} ({})", e.what(), e.key()));
  }
}

void check_sample(double v, long long rec) {
  if (!(v >= 0.0 && v <= 1.0))
    throw FieldFormatError(rec, fmt::format("sample {} has value {} outside the range [0,1]", rec, v));
}

ScalarField load_binary(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  std::int32_t d = 0, N = 0;
  double L = 0, tau = 0, eps = 0, p = 0;
  if (!get_le(is, d) || !get_le(is, N) || !get_le(is, L) || !get_le(is, tau) || !get_le(is, eps) ||
      !get_le(is, p))
    throw FieldFormatError(-1, "malformed header: truncated");
  if (d < 1 || d > 8) throw FieldFormatError(-1, fmt::format("malformed header: d={}", d));
  const Params prm = header_params(d, N, L, tau, eps, p);
  const std::streampos start = is.tellg();
  is.seekg(0, std::ios::end);
  const auto bytes = static_cast<long long>(is.tellg() - start);
  is.seekg(start);
  const long long expect = static_cast<long long>(prm.cells());
  if (bytes != expect * 8) {
    throw FieldFormatError(
        bytes / 8 < expect ? bytes / 8 : expect,
        fmt::format("shape mismatch: payload holds {} samples but header d={}, N={} expects {}",
                    bytes / 8.0, d, N, expect));
  }
  ScalarField f(prm);
  for (long long i = 0; i < expect; ++i) {
    double v;
    get_le(is, v);
    check_sample(v, i);
    f[i] = v;
  }
  return f;
}

double parse_double(const std::string& tok, long long rec) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(tok, &pos);
  } catch (...) {
    throw FieldFormatError(rec, fmt::format("sample {}: cannot parse '{}'", rec, tok));
  }
  while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
  if (pos != tok.size()) throw FieldFormatError(rec, fmt::format("sample {}: trailing text in '{}'", rec, tok));
  return v;
}

ScalarField load_csv(std::istream& is) {
  std::string line;
  std::getline(is, line);
  std::istringstream hs(line);
  std::string tag;
  hs >> tag >> tag;
  if (tag != "stripeforge-field") throw FieldFormatError(-1, "malformed header: missing stripeforge-field tag");
  int d = -1, N = -1;
  double L = -1, tau = -1, eps = -1, p = -1;
  std::string kv;
  while (hs >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw FieldFormatError(-1, fmt::format("malformed header entry '{}'", kv));
    const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
    try {
      if (k == "d") d = std::stoi(v);
      else if (k == "N") N = std::stoi(v);
      else if (k == "L") L = std::stod(v);
      else if (k == "tau") tau = std::stod(v);
      else if (k == "eps") eps = std::stod(v);
      else if (k == "p") p = std::stod(v);
      else throw FieldFormatError(-1, fmt::format("malformed header: unknown key '{}'", k));
    } catch (const std::logic_error&) {
      throw FieldFormatError(-1, fmt::format("malformed header: bad value for '{}'", k));
    }
  }
  if (d < 1 || d > 8 || N < 1) throw FieldFormatError(-1, "malformed header: d and N required");
  const Params prm = header_params(d, N, L, tau, eps, p);
  ScalarField f(prm);
  const long long rows = static_cast<long long>(prm.cells()) / N;
  long long row = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (row >= rows)
      throw FieldFormatError(row * N, fmt::format("shape mismatch: more than {} rows for header d={}, N={}",
                                                  rows, d, N));
    std::istringstream ls(line);
    std::string tok;
    int col = 0;
    while (std::getline(ls, tok, ',')) {
      const long long rec = row * N + col;
      if (col >= N)
        throw FieldFormatError(rec, fmt::format("shape mismatch: row {} has more than N={} values", row, N));
      const double v = parse_double(tok, rec);
      check_sample(v, rec);
      f[rec] = v;
      ++col;
    }
    if (col != N)
      throw FieldFormatError(row * N + col,
                             fmt::format("shape mismatch: row {} has {} values, expected N={}", row, col, N));
    ++row;
  }
  if (row != rows)
    throw FieldFormatError(row * N, fmt::format("shape mismatch: {} rows but header d={}, N={} expects {}",
                                                row, d, N, rows));
  return f;
}

}  // namespace

void save_field(const ScalarField& f, const std::filesystem::path& path, FieldFormat fmt) {
  const Params& prm = f.params;
  if (fmt == FieldFormat::Binary) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("path", fmt::format("cannot write {}", path.string()));
    os.write(kMagic, 8);
    put_le<std::int32_t>(os, prm.d);
    put_le<std::int32_t>(os, prm.N());
    put_le(os, prm.L);
    put_le(os, prm.tau);
    put_le(os, prm.eps);
    put_le(os, prm.p);
    for (double v : f.values) put_le(os, v);
  } else {
    std::ofstream os(path);
    if (!os) throw InputError("path", fmt::format("cannot write {}", path.string()));
    os << fmt::format("# stripeforge-field d={} N={} L={:.17g} tau={:.17g} eps={:.17g} p={:.17g}\n", prm.d,
                      prm.N(), prm.L, prm.tau, prm.eps, prm.p);
    const int N = prm.N();
    for (std::size_t i = 0; i < f.size(); ++i) {
      os << fmt::format("{:.17g}", f[i]);
      os << ((i + 1) % N == 0 ? '\n' : ',');
    }
  }
}

ScalarField load_field(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("path", fmt::format("cannot read {}", path.string()));
  char head[8] = {};
  is.read(head, 8);
  is.clear();
  is.seekg(0);
  if (std::memcmp(head, kMagic, 8) == 0) return load_binary(is);
  if (head[0] == '#') return load_csv(is);
  throw FieldFormatError(0, "malformed header: neither binary magic nor CSV header");
}

}  // namespace sf
