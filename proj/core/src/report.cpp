// SPDX-License-Identifier: Apache-2.0
#include "wsmt/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace wsmt {

namespace {

constexpr const char* kEmptyCell = "\xE2\x80\x94";  // em dash per the table convention

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt_signed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.2f", v);
  return buf;
}

struct ScoreColumn {
  std::string name;
  std::vector<std::optional<double>> values;  // one per iteration row
  std::vector<std::string> marks;
};

std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (char c : s)
    if ((static_cast<unsigned char>(c) & 0xc0) != 0x80) ++n;
  return n;
}

std::string pad(const std::string& s, std::size_t width) {
  std::size_t w = display_width(s);
  if (w >= width) return s;
  return std::string(width - w, ' ') + s;
}

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) widths[c] = display_width(header[c]);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c)
      widths[c] = std::max(widths[c], display_width(row[c]));
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out << "  ";
      out << (c == 0 ? row[c] + std::string(widths[c] - display_width(row[c]), ' ')
                     : pad(row[c], widths[c]));
    }
    out << '\n';
  };
  emit(header);
  {
    std::vector<std::string> rule(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) rule[c] = std::string(widths[c], '-');
    emit(rule);
  }
  for (const auto& row : rows) emit(row);
  return std::move(out).str();
}

std::vector<ScoreColumn> score_columns(const std::vector<IterationMetrics>& metrics,
                                       const std::string& forward_label,
                                       const std::string& reverse_label, bool any_reverse) {
  std::vector<ScoreColumn> cols;
  auto add = [&](const std::string& name) {
    cols.push_back({name, {}, {}});
    return cols.size() - 1;
  };
  std::size_t fd = add(forward_label + " dev");
  std::size_t ft = add(forward_label + " test");
  std::size_t rd = any_reverse ? add(reverse_label + " dev") : 0;
  std::size_t rt = any_reverse ? add(reverse_label + " test") : 0;
  for (const IterationMetrics& it : metrics) {
    std::string fmark = std::string(it.forward.sig_vs_prev ? "*" : "") +
                        std::string(it.forward.sig_vs_base ? "+" : "");
    cols[fd].values.push_back(it.forward.dev_bleu);
    cols[fd].marks.push_back(fmark);
    cols[ft].values.push_back(it.forward.test_bleu);
    cols[ft].marks.push_back(fmark);
    if (any_reverse) {
      std::string rmark;
      std::optional<double> rdev, rtest;
      if (it.reverse.has_value()) {
        rmark = std::string(it.reverse->sig_vs_prev ? "*" : "") +
                std::string(it.reverse->sig_vs_base ? "+" : "");
        rdev = it.reverse->dev_bleu;
        rtest = it.reverse->test_bleu;
      }
      cols[rd].values.push_back(rdev);
      cols[rd].marks.push_back(rmark);
      cols[rt].values.push_back(rtest);
      cols[rt].marks.push_back(rmark);
    }
  }
  return cols;
}

}  // namespace

std::string render_report_text(const std::vector<IterationMetrics>& metrics,
                               const std::string& forward_label,
                               const std::string& reverse_label) {
  if (metrics.empty() || metrics.front().iteration != 0)
    throw std::runtime_error("report needs iteration 0 first");
  bool any_reverse = std::any_of(metrics.begin(), metrics.end(),
                                 [](const IterationMetrics& m) { return m.reverse.has_value(); });
  std::vector<ScoreColumn> cols =
      score_columns(metrics, forward_label, reverse_label, any_reverse);

  std::vector<std::string> header{"Iteration"};
  for (const ScoreColumn& c : cols) header.push_back(c.name);
  header.insert(header.end(), {"|B_back|", "|B_dreamt|", "stop"});

  std::vector<std::vector<std::string>> rows;
  for (std::size_t r = 0; r < metrics.size(); ++r) {
    const IterationMetrics& it = metrics[r];
    std::vector<std::string> row{std::to_string(it.iteration)};
    for (const ScoreColumn& c : cols) {
      if (!c.values[r].has_value()) {
        row.push_back(kEmptyCell);
        continue;
      }
      double best = -1.0;
      for (const auto& v : c.values)
        if (v.has_value()) best = std::max(best, *v);
      std::string cell = fmt2(*c.values[r]);
      if (*c.values[r] == best) cell = "**" + cell + "**";
      row.push_back(cell + c.marks[r]);
    }
    auto count_cell = [](const std::optional<long>& v) {
      return v.has_value() ? std::to_string(*v) : std::string(kEmptyCell);
    };
    std::optional<long> back = it.forward.back_size;
    std::optional<long> dreamt = it.forward.dreamt_size;
    if (it.reverse.has_value()) {
      if (it.reverse->back_size.has_value())
        back = back.value_or(0) + *it.reverse->back_size;
      if (it.reverse->dreamt_size.has_value())
        dreamt = dreamt.value_or(0) + *it.reverse->dreamt_size;
    }
    row.push_back(count_cell(back));
    row.push_back(count_cell(dreamt));
    row.push_back(it.forward.early_stop_epoch.has_value()
                      ? std::to_string(*it.forward.early_stop_epoch)
                      : std::string(kEmptyCell));
    rows.push_back(std::move(row));
  }

  auto delta_row = [&](int base_iteration, const std::string& label) {
    std::vector<std::string> row{label};
    for (const ScoreColumn& c : cols) {
      std::optional<double> base;
      if (base_iteration < static_cast<int>(c.values.size()))
        base = c.values[static_cast<std::size_t>(base_iteration)];
      double best = -1.0;
      bool any = false;
      for (const auto& v : c.values)
        if (v.has_value()) {
          best = any ? std::max(best, *v) : *v;
          any = true;
        }
      if (metrics.size() < 2 || base_iteration >= static_cast<int>(metrics.size()) ||
          !base.has_value() || !any) {
        row.push_back(kEmptyCell);
        continue;
      }
      row.push_back(fmt_signed(best - *base));
    }
    row.insert(row.end(), {kEmptyCell, kEmptyCell, kEmptyCell});
    return row;
  };
  rows.push_back(delta_row(1, "\xCE\x94(best, Iteration 1)"));
  rows.push_back(delta_row(0, "\xCE\x94(best, Iteration 0)"));

  std::string table = render_table(header, rows);
  table += "\nbest per column in **bold**;"
           " * significant vs previous iteration; + significant vs iteration 0\n";
  return table;
}

std::string render_report_tsv(const std::vector<IterationMetrics>& metrics,
                              const std::string& forward_label,
                              const std::string& reverse_label) {
  if (metrics.empty() || metrics.front().iteration != 0)
    throw std::runtime_error("report needs iteration 0 first");
  bool any_reverse = std::any_of(metrics.begin(), metrics.end(),
                                 [](const IterationMetrics& m) { return m.reverse.has_value(); });
  std::ostringstream out;
  auto dir_header = [&](const std::string& label) {
    out << '\t' << label << "_dev" << '\t' << label << "_test" << '\t' << label << "_sig_prev"
        << '\t' << label << "_sig_base" << '\t' << label << "_back" << '\t' << label << "_dreamt"
        << '\t' << label << "_stop";
  };
  out << "iteration";
  dir_header(forward_label);
  if (any_reverse) dir_header(reverse_label);
  out << '\n';
  auto cell = [&](auto&& opt) -> std::string {
    if (!opt.has_value()) return "";
    using T = std::decay_t<decltype(*opt)>;
    if constexpr (std::is_same_v<T, double>) return fmt2(*opt);
    else return std::to_string(*opt);
  };
  auto dir_cells = [&](const DirectionMetrics& d) {
    out << '\t' << cell(d.dev_bleu) << '\t' << cell(d.test_bleu) << '\t'
        << (d.sig_vs_prev ? 1 : 0) << '\t' << (d.sig_vs_base ? 1 : 0) << '\t'
        << cell(d.back_size) << '\t' << cell(d.dreamt_size) << '\t' << cell(d.early_stop_epoch);
  };
  for (const IterationMetrics& it : metrics) {
    out << it.iteration;
    dir_cells(it.forward);
    if (any_reverse) {
      if (it.reverse.has_value()) dir_cells(*it.reverse);
      else out << "\t\t\t\t\t\t\t";
    }
    out << '\n';
  }
  return std::move(out).str();
}

}  // namespace wsmt
