#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "lesionmetrics/components.hpp"
#include "lesionmetrics/io.hpp"
#include "lesionmetrics/loss.hpp"
#include "lesionmetrics/phantom.hpp"
#include "lesionmetrics/pipeline.hpp"

namespace lm = lesionmetrics;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitPartial = 3;

unsigned default_jobs() {
  if (const char* env = std::getenv("LESIONMETRICS_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring LESIONMETRICS_THREADS='" << env << "'\n";
  }
  return 1;
}

struct EvaluateArgs {
  std::string manifest;
  std::string out_csv;
  std::string out_json;
  std::string match_table;
  std::string config;
  std::string connectivity = "26";
  double tolerance = 1.0;
  double constant = 2.0;
  unsigned jobs = 0;
  bool strict = false;
};

int run_evaluate(const EvaluateArgs& a) {
  const auto manifest = lm::CaseManifest::read(a.manifest);
  lm::EvaluateOptions opts;
  opts.metrics.connectivity = lm::parse_connectivity(a.connectivity);
  opts.metrics.tolerance_mm = a.tolerance;
  opts.metrics.numerator_constant = a.constant;
  opts.jobs = a.jobs > 0 ? a.jobs : default_jobs();
  if (!a.config.empty()) opts.config = a.config;
  opts.keep_match_tables = !a.match_table.empty();

  const auto out = lm::evaluate(manifest, opts);
  if (a.out_csv.empty()) {
    lm::write_metrics_csv(std::cout, out);
  } else {
    const std::filesystem::path p = a.out_csv;
    if (!p.parent_path().empty()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p);
    lm::write_metrics_csv(f, out);
    if (!f) throw lm::Error("failed writing " + p.string());
  }
  if (!a.out_json.empty()) lm::write_json(a.out_json, lm::metrics_json(out));
  if (!a.match_table.empty()) lm::write_json(a.match_table, lm::match_tables_json(out));

  for (const auto& e : out.errors) {
    std::cerr << "error: " << e.case_id << " (" << e.config << ", repeat " << e.repeat
              << "): " << e.reason << '\n';
  }
  if (out.errors.empty()) return kExitOk;
  return a.strict ? kExitValidation : kExitPartial;
}

struct CompareArgs {
  std::string csv_a;
  std::string csv_b;
  std::string name_a = "A";
  std::string name_b = "B";
  std::string out_json;
  std::string out_text;
};

int run_compare(const CompareArgs& a) {
  const auto report = lm::compare(lm::read_metrics_csv(std::filesystem::path(a.csv_a)),
                                  lm::read_metrics_csv(std::filesystem::path(a.csv_b)),
                                  a.name_a, a.name_b);
  const auto text = lm::render_text(report);
  std::cout << text;
  if (!a.out_text.empty()) {
    std::ofstream f(a.out_text);
    f << text;
  }
  if (!a.out_json.empty()) lm::write_json(a.out_json, lm::to_json(report));
  return kExitOk;
}

struct LossArgs {
  std::vector<std::string> pred;
  std::string gt;
  std::string preset = "baseline";
  double epsilon = 1e-5;
  double constant = 2.0;
  bool json = false;
};

// "LABEL=PATH" entries give one probability channel each; a single bare path is read as
// a label volume (one-hot per class) or, for a float file, as the channel of the only class.
std::map<std::int32_t, lm::ProbVolume> read_prediction(const std::vector<std::string>& specs,
                                                       const lm::LabelVolume& gt) {
  std::map<std::int32_t, lm::ProbVolume> out;
  if (specs.size() == 1 && specs[0].find('=') == std::string::npos) {
    const auto vol = lm::load_volume(specs[0]);
    if (const auto* labels = std::get_if<lm::LabelVolume>(&vol)) {
      for (auto l : gt.labels()) {
        out.emplace(l, lm::to_prob(labels->declares(l) ? lm::extract_class(*labels, l)
                                                       : lm::BinaryMask(labels->dims(), labels->spacing())));
      }
      return out;
    }
    if (gt.labels().size() != 1) {
      throw lm::ValidationError("a single probability file needs LABEL=PATH for multi-class ground truth");
    }
    out.emplace(gt.labels().front(), std::get<lm::ProbVolume>(vol));
    return out;
  }
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw lm::ValidationError("expected LABEL=PATH, got '" + s + "'");
    const auto label = std::stoi(s.substr(0, eq));
    out.insert_or_assign(label, lm::load_prob_volume(s.substr(eq + 1)));
  }
  return out;
}

int run_loss_eval(const LossArgs& a) {
  const auto gt = lm::load_label_volume(a.gt);
  auto cfg = lm::LossConfig::preset(a.preset);
  cfg.epsilon = a.epsilon;
  cfg.numerator_constant = a.constant;
  const auto r = lm::configured_loss(read_prediction(a.pred, gt), gt, cfg);

  if (a.json) {
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [label, d] : r.dice) {
      nlohmann::json c = {{"mode", lm::to_string(cfg.per_class_mode.at(label))}, {"dice_loss", d.value}};
      if (r.cross_entropy.contains(label)) c["cross_entropy"] = r.cross_entropy.at(label).value;
      per_class[lm::class_name(label)] = c;
    }
    std::cout << nlohmann::json{{"preset", a.preset}, {"value", r.value}, {"per_class", per_class}}.dump(2)
              << '\n';
  } else {
    std::cout << "value " << lm::format_number(r.value) << '\n';
    for (const auto& [label, d] : r.dice) {
      std::cout << lm::class_name(label) << ' ' << lm::to_string(cfg.per_class_mode.at(label)) << ' '
                << lm::format_number(d.value) << '\n';
    }
  }
  return kExitOk;
}

// Central differences of every preset's combined loss on random volumes.
double gradcheck(std::uint64_t seed, int cases, double h) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> side(4, 8);
  std::uniform_real_distribution<double> prob(0.02, 0.98);
  std::bernoulli_distribution fg(0.3);
  const char* presets[] = {"baseline", "dual", "selective"};
  double worst = 0.0;

  for (int c = 0; c < cases; ++c) {
    const lm::Dims d{side(rng), side(rng), side(rng)};
    std::vector<std::int32_t> labels(d.size());
    for (auto& v : labels) v = fg(rng) ? (fg(rng) ? 1 : 2) : 0;
    const lm::LabelVolume gt(d, {}, labels);
    std::map<std::int32_t, std::vector<double>> p;
    for (auto l : gt.labels()) {
      auto& ch = p[l];
      ch.resize(d.size());
      for (auto& v : ch) v = prob(rng);
    }
    const auto cfg = lm::LossConfig::preset(presets[c % 3]);
    auto volumes = [&](const std::map<std::int32_t, std::vector<double>>& ch) {
      std::map<std::int32_t, lm::ProbVolume> out;
      for (const auto& [l, v] : ch) out.emplace(l, lm::ProbVolume(d, {}, v));
      return out;
    };
    lm::WeightMapCache cache;
    const auto base = lm::configured_loss(volumes(p), gt, cfg, &cache);

    std::uniform_int_distribution<std::size_t> pick(0, d.size() - 1);
    for (auto l : gt.labels()) {
      for (int probe = 0; probe < 4; ++probe) {
        const auto k = pick(rng);
        auto plus = p;
        auto minus = p;
        plus[l][k] += h;
        minus[l][k] -= h;
        const double fd = (lm::configured_loss(volumes(plus), gt, cfg, &cache).value -
                           lm::configured_loss(volumes(minus), gt, cfg, &cache).value) /
                          (2.0 * h);
        const double an = base.gradient.at(l)[k];
        const double err = std::fabs(an - fd) / std::max(std::fabs(fd), 1e-3);
        worst = std::max(worst, err);
      }
    }
  }
  return worst;
}

struct PhantomArgs {
  std::string spec;
  std::string out_dir;
  std::string format = "raw";
};

int run_phantom(const PhantomArgs& a) {
  std::ifstream in(a.spec);
  if (!in) throw lm::ValidationError("cannot open " + a.spec);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw lm::FormatError(std::string("malformed phantom spec: ") + e.what());
  }
  const auto phantom = lm::generate(lm::phantom_spec_from_json(j));
  for (const auto& w : phantom.warnings) std::cerr << "warning: " << w << '\n';

  const std::filesystem::path dir = a.out_dir;
  std::filesystem::create_directories(dir);
  std::string ext;
  if (a.format == "raw") {
    ext = ".json";
  } else if (a.format == "nii" || a.format == "nii.gz") {
    ext = "." + a.format;
  } else {
    throw lm::ValidationError("unknown format '" + a.format + "'");
  }
  lm::save_volume(dir / ("gt" + ext), phantom.ground_truth);
  lm::save_volume(dir / ("pred" + ext), phantom.prediction);
  for (const auto& [label, p] : phantom.probabilities) {
    lm::save_volume(dir / ("prob_" + lm::class_name(label) + ext), p);
  }
  return kExitOk;
}

struct DumpArgs {
  std::string mask;
  std::string out;
  std::string connectivity = "26";
  int label = 0;
};

int run_components_dump(const DumpArgs& a) {
  const auto vol = lm::load_volume(a.mask, {.labels = {}, .any_positive_label = true});
  lm::BinaryMask mask;
  if (const auto* labels = std::get_if<lm::LabelVolume>(&vol)) {
    std::vector<std::uint8_t> bits(labels->size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
      const auto v = (*labels)[i];
      bits[i] = a.label == 0 ? v != 0 : v == a.label;
    }
    mask = lm::BinaryMask(labels->dims(), labels->spacing(), std::move(bits));
  } else {
    const auto& p = std::get<lm::ProbVolume>(vol);
    std::vector<std::uint8_t> bits(p.size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = p[i] >= 0.5;
    mask = lm::BinaryMask(p.dims(), p.spacing(), std::move(bits));
  }
  const auto comp = lm::label_components(mask, lm::parse_connectivity(a.connectivity));

  if (!a.out.empty()) {
    std::vector<double> ids(comp.ids.begin(), comp.ids.end());
    lm::write_voxels(a.out, comp.dims, comp.spacing, lm::VoxelType::Int32, ids);
  }
  nlohmann::json volumes = nlohmann::json::array();
  for (std::size_t id = 1; id <= comp.count(); ++id) {
    volumes.push_back({{"id", id}, {"voxels", comp.volume(static_cast<std::int32_t>(id))}});
  }
  std::cout << nlohmann::json{{"components", comp.count()}, {"volumes", volumes}}.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lesion segmentation metrics, volume-aware Dice loss and paired comparisons"};
  app.require_subcommand(1);
  int code = kExitOk;

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Compute per-case metrics from a manifest");
  evaluate->add_option("--manifest", ev.manifest, "CSV: case_id,gt,pred,fold,repeat,config")->required();
  evaluate->add_option("--out-csv", ev.out_csv, "Metrics CSV (stdout when omitted)");
  evaluate->add_option("--out-json", ev.out_json, "Metrics JSON");
  evaluate->add_option("--match-table", ev.match_table, "Per-lesion match tables as JSON");
  evaluate->add_option("--config", ev.config, "Only evaluate rows of this configuration");
  evaluate->add_option("--connectivity", ev.connectivity, "6, 18 or 26")->capture_default_str();
  evaluate->add_option("--tolerance", ev.tolerance, "SDS tolerance in mm")->capture_default_str();
  evaluate->add_option("--numerator-constant", ev.constant, "Adaptive Dice constant C")
      ->capture_default_str();
  evaluate->add_option("-j,--jobs", ev.jobs, "Cases evaluated in parallel (default LESIONMETRICS_THREADS or 1)");
  evaluate->add_flag("--strict", ev.strict, "Exit 2 when any case fails");
  evaluate->callback([&] { code = run_evaluate(ev); });

  CompareArgs cmp;
  auto* compare = app.add_subcommand("compare", "Paired comparison of two metric CSVs");
  compare->add_option("csv_a", cmp.csv_a, "Metrics CSV of configuration A")->required();
  compare->add_option("csv_b", cmp.csv_b, "Metrics CSV of configuration B")->required();
  compare->add_option("--name-a", cmp.name_a)->capture_default_str();
  compare->add_option("--name-b", cmp.name_b)->capture_default_str();
  compare->add_option("--out-json", cmp.out_json, "Comparison report as JSON");
  compare->add_option("--out-text", cmp.out_text, "Rendered table");
  compare->callback([&] { code = run_compare(cmp); });

  auto* loss = app.add_subcommand("loss", "Loss evaluation and gradient checks");
  loss->require_subcommand(1);
  LossArgs le;
  auto* loss_eval = loss->add_subcommand("eval", "Evaluate a loss preset on one case");
  loss_eval->add_option("--pred", le.pred, "LABEL=PATH per class, or one label/probability file")
      ->required();
  loss_eval->add_option("--gt", le.gt, "Ground-truth label volume")->required();
  loss_eval->add_option("--preset", le.preset)
      ->check(CLI::IsMember({"baseline", "dual", "dual_mask", "selective", "selective_ln"}))
      ->capture_default_str();
  loss_eval->add_option("--epsilon", le.epsilon)->capture_default_str();
  loss_eval->add_option("--numerator-constant", le.constant)->capture_default_str();
  loss_eval->add_flag("--json", le.json, "Emit JSON");
  loss_eval->callback([&] { code = run_loss_eval(le); });

  std::uint64_t seed = 0;
  int cases = 200;
  double step = 1e-4;
  double max_error = 1e-4;
  auto* grad = loss->add_subcommand("gradcheck", "Finite-difference check of analytic gradients");
  grad->add_option("--seed", seed)->capture_default_str();
  grad->add_option("--cases", cases)->capture_default_str();
  grad->add_option("--step", step)->capture_default_str();
  grad->add_option("--max-error", max_error, "Failure threshold")->capture_default_str();
  grad->callback([&] {
    const double worst = gradcheck(seed, cases, step);
    std::cout << "max relative error " << lm::format_number(worst) << '\n';
    code = worst <= max_error ? kExitOk : kExitFailure;
  });

  PhantomArgs ph;
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic ground truth and prediction");
  phantom->add_option("--spec", ph.spec, "Phantom spec JSON")->required();
  phantom->add_option("--out-dir", ph.out_dir)->required();
  phantom->add_option("--format", ph.format, "raw, nii or nii.gz")->capture_default_str();
  phantom->callback([&] { code = run_phantom(ph); });

  auto* components = app.add_subcommand("components", "Connected-component tools");
  components->require_subcommand(1);
  DumpArgs dump;
  auto* dump_cmd = components->add_subcommand("dump", "Label components of a mask");
  dump_cmd->add_option("--mask", dump.mask)->required();
  dump_cmd->add_option("--label", dump.label, "Foreground label (0: any nonzero)")->capture_default_str();
  dump_cmd->add_option("--connectivity", dump.connectivity)->capture_default_str();
  dump_cmd->add_option("--out", dump.out, "Component ids as a raw i32 volume");
  dump_cmd->callback([&] { code = run_components_dump(dump); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  } catch (const lm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return code;
}
