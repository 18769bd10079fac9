#pragma once

#include <map>
#include <string>
#include <vector>

#include "biharm/mesh.hpp"

namespace biharm {

// key=value lines, '#' starts a comment; later keys override earlier ones
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::string& path);

double kv_double(const KeyValues& kv, const std::string& key, double fallback);
int kv_int(const KeyValues& kv, const std::string& key, int fallback);
std::string kv_string(const KeyValues& kv, const std::string& key, const std::string& fallback);
std::vector<double> kv_list(const KeyValues& kv, const std::string& key, const std::vector<double>& fallback);
std::vector<double> parse_list(const std::string& s);

// Field container: "biharm-field v1 <n1> <nperp> <nperp> [key value ...]\n"
// then little-endian float64 (re, im) pairs over the n1 x nperp x nperp box,
// row-major with x3 fastest. Box points outside M are stored as zero.
struct FieldFile {
  int n1 = 0, n_perp = 0;
  std::vector<cplx> box;  // n1 * n_perp * n_perp
  std::vector<std::pair<std::string, double>> params;
};

FieldFile to_box(const Domain& d, const Field& u);
Field from_box(const Domain& d, const FieldFile& f);
void write_field(const std::string& path, const FieldFile& f);
FieldFile read_field(const std::string& path);
void write_field(const std::string& path, const Domain& d, const Field& u,
                 const std::vector<std::pair<std::string, double>>& params = {});

// x1 slice of a grid field: x2, x3, re, im for every column of M
void write_slice_csv(const std::string& path, const Domain& d, const Field& u, int i1);

}  // namespace biharm
