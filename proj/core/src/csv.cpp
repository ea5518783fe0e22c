#include "kw/csv.hpp"

#include <cstdio>
#include <fstream>

namespace kw {

std::string csv_number(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string attention_stats_csv(const std::vector<AttentionStats>& stats, int n,
                                bool zero_cell) {
  const int q = n + (zero_cell ? 1 : 0);
  std::string out;
  for (int j = 1; j <= n; ++j) {
    if (j > 1) out += ',';
    out += std::to_string(j);
  }
  if (zero_cell) out += ",e_z";
  out += '\n';

  for (const auto& st : stats) {
    if (st.q != q) {
      throw Error("attention_stats_csv: layer '" + st.layer_id + "' has " +
                  std::to_string(st.q) + " columns, table has " + std::to_string(q));
    }
    for (int i = 0; i < st.m; ++i) {
      for (int j = 0; j < q; ++j) {
        if (j > 0) out += ',';
        out += csv_number(st.mean_alpha.at(i, j));
      }
      out += '\n';
    }
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write '" + path + "'");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw Error("short write to '" + path + "'");
}

}  // namespace kw
