#include "biharm/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace biharm {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (trim(v.substr(pos)).empty()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("value of '" + key + "' is not a number: " + v);
}

double le_double(const unsigned char* p) {
  std::uint64_t u = 0;
  for (int b = 7; b >= 0; --b) u = (u << 8) | p[b];
  return std::bit_cast<double>(u);
}

void put_le(std::vector<unsigned char>& out, double x) {
  std::uint64_t u = std::bit_cast<std::uint64_t>(x);
  for (int b = 0; b < 8; ++b) {
    out.push_back(static_cast<unsigned char>(u & 0xff));
    u >>= 8;
  }
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed config line: " + line);
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

double kv_double(const KeyValues& kv, const std::string& key, double fallback) {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : to_double(key, it->second);
}

int kv_int(const KeyValues& kv, const std::string& key, int fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const double x = to_double(key, it->second);
  if (x != std::floor(x)) throw ConfigError("value of '" + key + "' must be an integer");
  return static_cast<int>(x);
}

std::string kv_string(const KeyValues& kv, const std::string& key, const std::string& fallback) {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double("list", item));
  }
  return out;
}

std::vector<double> kv_list(const KeyValues& kv, const std::string& key, const std::vector<double>& fallback) {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : parse_list(it->second);
}

DomainConfig read_domain_config(const std::string& path) {
  const KeyValues kv = read_key_values(path);
  DomainConfig cfg;
  cfg.x1_extent = kv_double(kv, "x1_extent", cfg.x1_extent);
  cfg.transversal_radius = kv_double(kv, "transversal_radius", cfg.transversal_radius);
  cfg.n1 = kv_int(kv, "n1", cfg.n1);
  cfg.n_perp = kv_int(kv, "n_perp", cfg.n_perp);
  return cfg;
}

FieldFile to_box(const Domain& d, const Field& u) {
  if (u.size() != d.num_nodes()) throw DimensionError("field does not live on this domain");
  FieldFile f;
  f.n1 = d.n1();
  f.n_perp = d.n_perp();
  f.box.assign(static_cast<std::size_t>(f.n1) * f.n_perp * f.n_perp, 0.0);
  for (int n = 0; n < d.num_nodes(); ++n) {
    const auto [i, j, k] = d.index(n);
    f.box[(static_cast<std::size_t>(i) * f.n_perp + j) * f.n_perp + k] = u[n];
  }
  return f;
}

Field from_box(const Domain& d, const FieldFile& f) {
  if (f.n1 != d.n1() || f.n_perp != d.n_perp()) throw DimensionError("field file grid does not match the domain");
  Field u(d.num_nodes());
  for (int n = 0; n < d.num_nodes(); ++n) {
    const auto [i, j, k] = d.index(n);
    u[n] = f.box[(static_cast<std::size_t>(i) * f.n_perp + j) * f.n_perp + k];
  }
  return u;
}

void write_field(const std::string& path, const FieldFile& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  std::ostringstream head;
  head.precision(17);
  head << "biharm-field v1 " << f.n1 << ' ' << f.n_perp << ' ' << f.n_perp;
  for (const auto& [k, v] : f.params) head << ' ' << k << ' ' << v;
  head << '\n';
  out << head.str();
  std::vector<unsigned char> buf;
  buf.reserve(f.box.size() * 16);
  for (const cplx& z : f.box) {
    put_le(buf, z.real());
    put_le(buf, z.imag());
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("write failed: " + path);
}

void write_field(const std::string& path, const Domain& d, const Field& u,
                 const std::vector<std::pair<std::string, double>>& params) {
  FieldFile f = to_box(d, u);
  f.params = params;
  write_field(path, f);
}

FieldFile read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string head;
  std::getline(in, head);
  std::istringstream hs(head);
  std::string magic, version;
  FieldFile f;
  int n3 = 0;
  hs >> magic >> version >> f.n1 >> f.n_perp >> n3;
  if (magic != "biharm-field" || version != "v1" || !hs || n3 != f.n_perp || f.n1 <= 0 || f.n_perp <= 0)
    throw Error("not a biharm-field v1 file: " + path);
  std::string key;
  double val = 0.0;
  while (hs >> key >> val) f.params.emplace_back(key, val);
  const std::size_t n = static_cast<std::size_t>(f.n1) * f.n_perp * f.n_perp;
  std::vector<unsigned char> buf(n * 16);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw Error("truncated field file: " + path);
  f.box.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.box[i] = {le_double(&buf[16 * i]), le_double(&buf[16 * i + 8])};
  return f;
}

void write_slice_csv(const std::string& path, const Domain& d, const Field& u, int i1) {
  if (i1 < 0 || i1 >= d.n1()) throw ConfigError("slice index out of range");
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out.precision(10);
  out << "x1,x2,x3,re,im\n";
  for (const auto& [j, k] : d.columns()) {
    const int n = d.node_at(i1, j, k);
    if (n < 0) continue;
    const auto& x = d.coord(n);
    out << x[0] << ',' << x[1] << ',' << x[2] << ',' << u[n].real() << ',' << u[n].imag() << '\n';
  }
}

}  // namespace biharm
