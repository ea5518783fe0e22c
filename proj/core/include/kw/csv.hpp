#pragma once

#include <string>
#include <vector>

#include "kw/train.hpp"

// Attention statistics are reported as RFC-4180 CSV: LF line endings, one
// column per cell (header "1".."n", plus a trailing "e_z" column when the
// plan carries a zero cell), numbers rendered with %.9g. Rows are group-wide
// mixtures: member layers in manifest order, each contributing its mixtures
// in index order.

namespace kw {

std::string csv_number(double v);

// stats: the group's member layers in order (or a single private-bank layer).
std::string attention_stats_csv(const std::vector<AttentionStats>& stats, int n,
                                bool zero_cell);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace kw
