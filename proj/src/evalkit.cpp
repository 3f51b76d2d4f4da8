#include "procrl/evalkit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "procrl/errors.hpp"
#include "procrl/io.hpp"
#include "procrl/parallel.hpp"
#include "procrl/svg.hpp"

namespace procrl {
namespace fs = std::filesystem;

namespace {

std::uint64_t sample_stream(std::uint64_t seed, const Task& task, int j) {
  return stream_key(seed, {tag(StreamTag::kEval), fnv1a64(task.id),
                           static_cast<std::uint64_t>(j)});
}

}  // namespace

PassAt1Result pass_at_1(const PolicyModel& policy, std::span<const Task> tasks,
                        const EvalConfig& cfg) {
  if (cfg.n_samples < 1) throw ConfigInvalid("eval n_samples must be >= 1");
  PassAt1Result out;
  out.tasks.resize(tasks.size());
  const DecodeConfig decode{cfg.temperature, cfg.top_p};
  parallel_for(tasks.size(), [&](std::size_t i) {
    const Task& task = tasks[i];
    const TaskFeatures enc = encode_task(task);
    TaskPassDetail& d = out.tasks[i];
    d.task_id = task.id;
    d.samples = cfg.n_samples;
    for (int j = 0; j < cfg.n_samples; ++j) {
      Rng rng(sample_stream(cfg.seed, task, j));
      const SampledTokens s = sample_continuation(policy, enc, {}, rng, decode);
      d.lengths.push_back(static_cast<int>(s.tokens.size()));
      if (passes(s.tokens, task.tests)) ++d.passed;
    }
  });
  double total = 0.0;
  for (const TaskPassDetail& d : out.tasks) total += static_cast<double>(d.passed) / d.samples;
  out.pass_at_1 = tasks.empty() ? 0.0 : total / static_cast<double>(tasks.size());
  return out;
}

std::vector<double> best_of_k_curve(const PolicyModel& policy, std::span<const Task> tasks,
                                    const BestOfKConfig& cfg) {
  if (cfg.k_max < 1) throw ConfigInvalid("k_max must be >= 1");
  // first[i] = index of the first passing sample, k_max when none passes.
  std::vector<int> first(tasks.size(), cfg.k_max);
  const DecodeConfig decode{cfg.temperature, cfg.top_p};
  parallel_for(tasks.size(), [&](std::size_t i) {
    const TaskFeatures enc = encode_task(tasks[i]);
    for (int j = 0; j < cfg.k_max; ++j) {
      Rng rng(sample_stream(cfg.seed, tasks[i], j));
      const SampledTokens s = sample_continuation(policy, enc, {}, rng, decode);
      if (passes(s.tokens, tasks[i].tests)) {
        first[i] = j;
        break;
      }
    }
  });
  std::vector<double> curve(static_cast<std::size_t>(cfg.k_max), 0.0);
  if (tasks.empty()) return curve;
  for (int k = 1; k <= cfg.k_max; ++k) {
    const auto solved = std::count_if(first.begin(), first.end(), [k](int f) { return f < k; });
    curve[static_cast<std::size_t>(k - 1)] =
        static_cast<double>(solved) / static_cast<double>(tasks.size());
  }
  return curve;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

LengthDelta length_stratified_delta(const PassAt1Result& a, const PassAt1Result& b,
                                    std::span<const double> edges) {
  if (edges.size() < 2) throw ConfigInvalid("length bins need at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw ConfigInvalid("length bin edges must increase");
  }
  if (a.tasks.size() != b.tasks.size()) {
    throw LengthMismatch("length delta needs results over the same tasks");
  }
  const std::size_t nbins = edges.size() - 1;
  LengthDelta out;
  out.bins.resize(nbins);
  std::vector<double> sum_a(nbins, 0.0), sum_b(nbins, 0.0);
  for (std::size_t i = 0; i < nbins; ++i) {
    out.bins[i].lo = edges[i];
    out.bins[i].hi = edges[i + 1];
  }
  for (std::size_t t = 0; t < b.tasks.size(); ++t) {
    const TaskPassDetail& tb = b.tasks[t];
    const TaskPassDetail& ta = a.tasks[t];
    if (ta.task_id != tb.task_id) throw LengthMismatch("task order differs between results");
    const double len = median(std::vector<double>(tb.lengths.begin(), tb.lengths.end()));
    std::size_t bin = 0;
    while (bin + 1 < nbins && len >= edges[bin + 1]) ++bin;
    out.bins[bin].population += 1;
    sum_a[bin] += static_cast<double>(ta.passed) / ta.samples;
    sum_b[bin] += static_cast<double>(tb.passed) / tb.samples;
  }
  for (std::size_t i = 0; i < nbins; ++i) {
    LengthBin& bin = out.bins[i];
    if (bin.population == 0) continue;
    bin.pass_a = sum_a[i] / bin.population;
    bin.pass_b = sum_b[i] / bin.population;
    bin.delta = *bin.pass_a - *bin.pass_b;
  }
  out.overall_delta = a.pass_at_1 - b.pass_at_1;
  return out;
}

LengthDelta length_stratified_delta(const PolicyModel& policy_a, const PolicyModel& policy_b,
                                    std::span<const Task> tasks, const EvalConfig& cfg,
                                    std::span<const double> edges) {
  if (edges.size() < 2) throw ConfigInvalid("length bins need at least two edges");
  return length_stratified_delta(pass_at_1(policy_a, tasks, cfg),
                                 pass_at_1(policy_b, tasks, cfg), edges);
}

nlohmann::json pass_result_to_json(const PassAt1Result& r) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const TaskPassDetail& d : r.tasks) {
    tasks.push_back({{"task_id", d.task_id},
                     {"passed", d.passed},
                     {"samples", d.samples},
                     {"lengths", d.lengths}});
  }
  return {{"pass_at_1", r.pass_at_1}, {"tasks", tasks}};
}

nlohmann::json length_delta_to_json(const LengthDelta& d) {
  nlohmann::json bins = nlohmann::json::array();
  for (const LengthBin& b : d.bins) {
    nlohmann::json j = {{"lo", b.lo}, {"hi", b.hi}, {"population", b.population}};
    j["pass_a"] = b.pass_a ? nlohmann::json(*b.pass_a) : nlohmann::json(nullptr);
    j["pass_b"] = b.pass_b ? nlohmann::json(*b.pass_b) : nlohmann::json(nullptr);
    j["delta"] = b.delta ? nlohmann::json(*b.delta) : nlohmann::json(nullptr);
    bins.push_back(std::move(j));
  }
  return {{"bins", bins}, {"overall_delta", d.overall_delta}};
}

// ---------------------------------------------------------------------------
// Report rendering.

namespace {

struct MetricsFile {
  std::string run;
  std::string source;  // stage path relative to the run dir, '/'-separated
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

MetricsFile read_metrics(const fs::path& path, const std::string& run, const std::string& source) {
  MetricsFile m{run, source, {}, {}};
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw MissingMetrics("empty metrics file " + path.string());
  m.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (!line.empty()) m.rows.push_back(split_csv_line(line));
  }
  return m;
}

std::vector<fs::path> sorted_dirs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<MetricsFile> find_metrics(const fs::path& run_dir, const std::string& run) {
  std::vector<MetricsFile> out;
  for (const fs::path& stage : sorted_dirs(run_dir)) {
    const std::string stage_name = stage.filename().string();
    if (fs::is_regular_file(stage / "metrics.csv")) {
      out.push_back(read_metrics(stage / "metrics.csv", run, stage_name));
    }
    for (const fs::path& sub : sorted_dirs(stage)) {
      if (fs::is_regular_file(sub / "metrics.csv")) {
        out.push_back(read_metrics(sub / "metrics.csv", run,
                                   stage_name + "/" + sub.filename().string()));
      }
    }
  }
  return out;
}

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) {
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  }
  return out;
}

std::optional<std::size_t> column(const MetricsFile& m, const std::string& name) {
  const auto it = std::find(m.header.begin(), m.header.end(), name);
  if (it == m.header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - m.header.begin());
}

Series metric_series(const MetricsFile& m, const std::string& name) {
  Series s;
  s.label = name;
  const auto step = column(m, "step");
  const auto col = column(m, name);
  if (!step || !col) return s;
  for (const auto& row : m.rows) {
    if (row.size() <= std::max(*step, *col)) continue;
    s.x.push_back(std::stod(row[*step]));
    s.y.push_back(std::stod(row[*col]));
  }
  return s;
}

std::string opt_cell(const nlohmann::json& j) {
  return j.is_null() ? std::string() : format_double(j.get<double>());
}

}  // namespace

void render_report(std::span<const fs::path> run_dirs, const fs::path& out_dir) {
  if (run_dirs.empty()) throw MissingMetrics("no run directories given");

  std::vector<MetricsFile> metrics;
  std::vector<std::pair<std::string, nlohmann::json>> evals;
  for (std::size_t i = 0; i < run_dirs.size(); ++i) {
    const std::string run = "run" + std::to_string(i);
    auto found = find_metrics(run_dirs[i], run);
    metrics.insert(metrics.end(), std::make_move_iterator(found.begin()),
                   std::make_move_iterator(found.end()));
    const fs::path eval_path = run_dirs[i] / "eval" / "eval.json";
    if (fs::is_regular_file(eval_path)) {
      evals.emplace_back(run, nlohmann::json::parse(read_file(eval_path)));
    }
  }
  if (metrics.empty()) throw MissingMetrics("no metrics.csv found under the given run directories");

  nlohmann::json report;
  report["runs"] = nlohmann::json::array();
  for (std::size_t i = 0; i < run_dirs.size(); ++i) {
    report["runs"].push_back("run" + std::to_string(i));
  }
  report["notes"] = {
      {"length_binning",
       "tasks are binned by the baseline policy's median sampled length per task"},
      {"top_k", "top-k truncation is not applied: with 15 tokens any k >= 15 is a no-op"},
  };

  // Training curves.
  std::string training = "run,source," + std::string("step,mode,pass_rate,mean_reward,mean_dense,"
                                                      "mean_kl,mean_len,mean_nop,policy_loss,"
                                                      "value_loss") + "\n";
  report["training"] = nlohmann::json::array();
  for (const MetricsFile& m : metrics) {
    for (const auto& row : m.rows) {
      training += m.run + "," + m.source;
      for (const auto& cell : row) training += "," + cell;
      training += "\n";
    }
    nlohmann::json entry = {{"run", m.run}, {"source", m.source}, {"steps", m.rows.size()}};
    if (!m.rows.empty()) {
      nlohmann::json last;
      for (std::size_t c = 0; c < m.header.size() && c < m.rows.back().size(); ++c) {
        last[m.header[c]] = m.rows.back()[c];
      }
      entry["final"] = last;
    }
    report["training"].push_back(entry);
    const std::string name = "training_" + m.run + "_" + slug(m.source) + ".svg";
    write_file(out_dir / name,
               render_svg({m.run + " " + m.source, "step", "value"},
                          {metric_series(m, "pass_rate"), metric_series(m, "mean_reward"),
                           metric_series(m, "mean_nop")}));
  }
  write_file(out_dir / "training.csv", training);

  std::string pass_csv = "run,policy,pass_at_1,tasks\n";
  std::string bok_csv = "run,policy,k,pass_rate\n";
  std::string delta_csv = "run,comparison,lo,hi,population,pass_a,pass_b,delta\n";
  std::vector<Series> bok_series;
  std::vector<Series> delta_series;
  report["eval"] = nlohmann::json::array();
  for (const auto& [run, ev] : evals) {
    nlohmann::json summary = {{"run", run}, {"policies", nlohmann::json::array()}};
    for (const auto& p : ev.value("policies", nlohmann::json::array())) {
      const std::string name = p.at("name").get<std::string>();
      const double pass = p.at("pass_at_1").get<double>();
      const std::size_t ntasks = p.contains("tasks") ? p.at("tasks").size() : 0;
      pass_csv += run + "," + name + "," + format_double(pass) + "," + std::to_string(ntasks) + "\n";
      nlohmann::json ps = {{"name", name}, {"pass_at_1", pass}};
      if (p.contains("best_of_k")) {
        Series s;
        s.label = run + " " + name;
        const auto& curve = p.at("best_of_k");
        for (std::size_t k = 0; k < curve.size(); ++k) {
          const double v = curve[k].get<double>();
          bok_csv += run + "," + name + "," + std::to_string(k + 1) + "," + format_double(v) + "\n";
          s.x.push_back(static_cast<double>(k + 1));
          s.y.push_back(v);
        }
        if (!curve.empty()) ps["best_of_k_max"] = curve.back();
        bok_series.push_back(std::move(s));
      }
      summary["policies"].push_back(ps);
    }
    for (const auto& d : ev.value("length_delta", nlohmann::json::array())) {
      const std::string cmp = d.at("comparison").get<std::string>();
      Series s;
      s.label = run + " " + cmp;
      double idx = 0.0;
      for (const auto& b : d.at("bins")) {
        delta_csv += run + "," + cmp + "," + format_double(b.at("lo").get<double>()) + "," +
                     format_double(b.at("hi").get<double>()) + "," +
                     std::to_string(b.at("population").get<int>()) + "," +
                     opt_cell(b.at("pass_a")) + "," + opt_cell(b.at("pass_b")) + "," +
                     opt_cell(b.at("delta")) + "\n";
        s.x.push_back(idx);
        s.y.push_back(b.at("delta").is_null() ? std::nan("") : b.at("delta").get<double>());
        idx += 1.0;
      }
      delta_series.push_back(std::move(s));
      summary["length_delta"].push_back({{"comparison", cmp},
                                         {"overall_delta", d.at("overall_delta")}});
    }
    report["eval"].push_back(summary);
  }
  write_file(out_dir / "pass_at_1.csv", pass_csv);
  write_file(out_dir / "best_of_k.csv", bok_csv);
  write_file(out_dir / "length_delta.csv", delta_csv);
  if (!bok_series.empty()) {
    write_file(out_dir / "best_of_k.svg",
               render_svg({"Best-of-K pass rate", "K", "pass rate"}, bok_series));
  }
  if (!delta_series.empty()) {
    write_file(out_dir / "length_delta.svg",
               render_svg({"Pass@1 difference by baseline length bin", "bin", "delta",
                           /*bars=*/true},
                          delta_series));
  }
  write_file(out_dir / "report.json", report.dump(2) + "\n");
}

}  // namespace procrl
