// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

namespace wsmt {

struct DirectionMetrics {
  std::optional<double> dev_bleu;
  std::optional<double> test_bleu;
  std::optional<long> back_size;
  std::optional<long> dreamt_size;
  std::optional<int> early_stop_epoch;
  bool sig_vs_prev = false;  // rendered as '*'
  bool sig_vs_base = false;  // rendered as '+'
};

struct IterationMetrics {
  int iteration = 0;  // 0 is the MLE baseline
  DirectionMetrics forward;
  std::optional<DirectionMetrics> reverse;
};

std::string render_report_text(const std::vector<IterationMetrics>& metrics,
                               const std::string& forward_label = "src-trg",
                               const std::string& reverse_label = "trg-src");
std::string render_report_tsv(const std::vector<IterationMetrics>& metrics,
                              const std::string& forward_label = "src-trg",
                              const std::string& reverse_label = "trg-src");

}  // namespace wsmt
