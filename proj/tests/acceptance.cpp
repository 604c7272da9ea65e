// End-to-end acceptance suite. Runs every gate at full scale and prints one
// PASS/FAIL line per criterion; exits non-zero when any gate fails.
#include "datamark/harness.hpp"
#include "datamark/mock_server.hpp"
#include "oracles.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace datamark;

namespace {

constexpr std::uint64_t kSeed = 42;

struct Gate {
  int id;
  std::string name;
  bool pass = true;
  std::string detail;
};

std::vector<Gate> gates;

void record(int id, const std::string& name, bool pass, const std::string& detail) {
  gates.push_back({id, name, pass, detail});
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

ScenarioSpec spec_for(Modality modality, ScenarioKind kind,
                      const std::string& trigger = "") {
  auto spec = ScenarioSpec::defaults_for(modality, kind);
  if (!trigger.empty()) spec.train_trigger = trigger;
  spec.seed = kSeed;
  return spec;
}

double log10_or_floor(double p) { return p > 0.0 ? std::log10(p) : -400.0; }

}  // namespace

int main() {
  std::map<std::string, ExperimentReport> lab;
  auto run = [&](Modality modality, ScenarioKind kind, const std::string& trigger,
                 const std::string& key) -> const ExperimentReport& {
    lab.emplace(key, run_scenario(spec_for(modality, kind, trigger)));
    return lab.at(key);
  };

  for (auto [modality, tag] : std::vector<std::pair<Modality, std::string>>{
           {Modality::Tensor, "tensor"},
           {Modality::Tokens, "tokens"},
           {Modality::Graph, "graph"}}) {
    run(modality, ScenarioKind::Steal, "", tag + "/steal");
    run(modality, ScenarioKind::IndependentTrigger, "", tag + "/indep-trigger");
    run(modality, ScenarioKind::IndependentModel, "", tag + "/indep-model");
  }
  run(Modality::Tensor, ScenarioKind::Steal, "blend", "tensor-blend/steal");
  run(Modality::Tokens, ScenarioKind::Steal, "sentence", "tokens-sentence/steal");
  run(Modality::Graph, ScenarioKind::Steal, "subgraph-rand", "graph-rand/steal");

  // 1. Harmlessness: watermarking costs at most 3 BA points, and the run
  //    itself finishes inside two minutes.
  {
    const auto& r = lab.at("tensor/steal");
    bool pass = r.ba_watermarked >= r.ba_clean - 0.03 && r.wall_clock_seconds <= 120.0;
    record(1, "harmlessness (BA drop <= 3 points, runtime <= 2 min)", pass,
           "BA clean=" + fmt(r.ba_clean) + " watermarked=" + fmt(r.ba_watermarked) +
               " wall=" + fmt(r.wall_clock_seconds) + "s");
  }

  // 2. Distinctiveness: WSR gates per trigger family.
  {
    struct Want {
      const char* key;
      double min_wsr;
    };
    const Want wants[] = {{"tensor/steal", 0.95},          {"tensor-blend/steal", 0.90},
                          {"tokens/steal", 0.90},          {"tokens-sentence/steal", 0.90},
                          {"graph/steal", 0.90},           {"graph-rand/steal", 0.90}};
    bool pass = true;
    std::string detail;
    for (const auto& w : wants) {
      double wsr = lab.at(w.key).wsr;
      if (wsr < w.min_wsr) pass = false;
      detail += std::string(w.key) + "=" + fmt(wsr) + " ";
    }
    record(2, "distinctiveness (WSR gates per trigger family)", pass, detail);
  }

  // 3. Probability-available verification on all modalities.
  {
    bool pass = true;
    std::string detail;
    for (const char* tag : {"tensor", "tokens", "graph"}) {
      const auto& steal = lab.at(std::string(tag) + "/steal").probability_verdict;
      const auto& it = lab.at(std::string(tag) + "/indep-trigger").probability_verdict;
      const auto& im = lab.at(std::string(tag) + "/indep-model").probability_verdict;
      bool ok = steal.p_value < 0.01 && *steal.delta_p > 0.5 &&
                it.p_value > 0.05 && std::fabs(*it.delta_p) <= 0.05 &&
                im.p_value > 0.05 && std::fabs(*im.delta_p) <= 0.05;
      if (!ok) pass = false;
      detail += std::string(tag) + ": steal(p=" + fmt(steal.p_value) +
                ",dP=" + fmt(*steal.delta_p) + ") iT(p=" + fmt(it.p_value) +
                ",dP=" + fmt(*it.delta_p) + ") iM(p=" + fmt(im.p_value) +
                ",dP=" + fmt(*im.delta_p) + ")  ";
    }
    record(3, "probability-available verification (m=100, tau=0.2)", pass, detail);
  }

  // 4. Label-only verification on all modalities.
  {
    bool pass = true;
    std::string detail;
    for (const char* tag : {"tensor", "tokens", "graph"}) {
      double p_steal = lab.at(std::string(tag) + "/steal").label_only_verdict.p_value;
      double p_it = lab.at(std::string(tag) + "/indep-trigger").label_only_verdict.p_value;
      double p_im = lab.at(std::string(tag) + "/indep-model").label_only_verdict.p_value;
      bool ok = p_steal < 0.01 && p_it > 0.05 && p_im > 0.05;
      if (!ok) pass = false;
      detail += std::string(tag) + ": steal=" + fmt(p_steal) + " iT=" + fmt(p_it) +
                " iM=" + fmt(p_im) + "  ";
    }
    record(4, "label-only verification", pass, detail);
  }

  // 5. Poisoning-rate sweep: WSR non-decreasing (at most one inversion of at
  //    most 2 points) and BA moving at most 5 points across the sweep.
  {
    auto rows = sweep_gamma({0.01, 0.05, 0.1, 0.2},
                            spec_for(Modality::Tensor, ScenarioKind::Steal));
    int inversions = 0;
    double worst_drop = 0.0;
    double ba_min = rows[0].ba, ba_max = rows[0].ba;
    std::string detail;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0 && rows[i].wsr < rows[i - 1].wsr) {
        ++inversions;
        worst_drop = std::max(worst_drop, rows[i - 1].wsr - rows[i].wsr);
      }
      ba_min = std::min(ba_min, rows[i].ba);
      ba_max = std::max(ba_max, rows[i].ba);
      detail += "g=" + fmt(rows[i].gamma) + ":WSR=" + fmt(rows[i].wsr) +
                ",BA=" + fmt(rows[i].ba) + " ";
    }
    bool pass = inversions <= 1 && worst_drop <= 0.02 && (ba_max - ba_min) <= 0.05;
    record(5, "gamma-sweep monotonicity", pass, detail);
  }

  // 6. Sampling-number sweep: log10(p_steal) non-increasing with at most one
  //    inversion; independent p above 0.05 at every m.
  {
    auto rows = sweep_m({20, 40, 60, 80, 100, 120, 140},
                        spec_for(Modality::Tensor, ScenarioKind::Steal));
    int inversions = 0;
    bool indep_ok = true;
    std::string detail;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0 &&
          log10_or_floor(rows[i].p_steal) > log10_or_floor(rows[i - 1].p_steal))
        ++inversions;
      if (!(rows[i].p_independent > 0.05)) indep_ok = false;
      detail += "m=" + std::to_string(rows[i].m) +
                ":lg(p)=" + fmt(log10_or_floor(rows[i].p_steal)) + " ";
    }
    bool pass = inversions <= 1 && indep_ok;
    record(6, "m-sweep trend", pass, detail);
  }

  // 7. Fine-tuning resistance: WSR stays at or above 60% and BA never drops
  //    more than 5 points from the pre-fine-tune row.
  {
    std::vector<int> epochs;
    for (int e = 1; e <= 20; ++e) epochs.push_back(e);
    auto rows = finetune_resistance(spec_for(Modality::Tensor, ScenarioKind::Steal),
                                    0.1, epochs);
    bool pass = true;
    for (const auto& r : rows) {
      if (r.ba < rows[0].ba - 0.05) pass = false;
    }
    if (rows.back().wsr < 0.60) pass = false;
    record(7, "fine-tuning resistance (final WSR >= 60%, BA drop <= 5 points)",
           pass,
           "WSR " + fmt(rows[0].wsr) + " -> " + fmt(rows.back().wsr) + ", BA " +
               fmt(rows[0].ba) + " -> " + fmt(rows.back().ba));
  }

  // 8. Statistical kernel oracles.
  {
    bool pass = true;
    std::string detail;
    double worst_sf = 0.0;
    for (double t : {0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, -0.5,
                     -1.5, -2.5, -4.0}) {
      for (double df : {1.0, 2.0, 3.0, 4.0, 5.0, 8.0, 10.0, 19.0, 30.0, 50.0, 99.0,
                        139.0, 200.0}) {
        double ref = oracles::t_sf_reference(t, df);
        double rel = std::fabs(student_t_sf(t, df) - ref) / std::fabs(ref);
        worst_sf = std::max(worst_sf, rel);
      }
    }
    if (worst_sf > 1e-10) pass = false;
    detail += "t-sf worst rel=" + fmt(worst_sf) + "; ";

    int mismatches = 0, cases = 0;
    for (int m : {1, 2, 5, 10, 25, 50, 100, 150, 200}) {
      for (double p0 : {0.5, 1.0 / 3.0, 0.1, 0.25, 0.05, 0.9}) {
        int step = m > 20 ? m / 10 : 1;
        for (int s = 0; s <= m; s += step) {
          ++cases;
          if (binomial_tail_geq(m, s, p0) !=
              oracles::binomial_tail_reference(m, s, p0))
            ++mismatches;
        }
      }
    }
    if (mismatches != 0) pass = false;
    detail += "binomial mismatches=" + std::to_string(mismatches) + "/" +
              std::to_string(cases) + "; ";

    Rng rng(7);
    double worst_t = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      int m = 2 + rng.uniform_int(40);
      PairedSamples s;
      for (int i = 0; i < m; ++i) {
        s.benign.push_back(rng.next_double() * 0.5);
        s.watermarked.push_back(0.5 + rng.next_double() * 0.5);
      }
      double tau = rng.next_double() * 0.5;
      auto r = paired_t_test_shifted(s, tau);
      double mean = 0.0;
      for (int i = 0; i < m; ++i) mean += s.watermarked[static_cast<std::size_t>(i)] -
                                          s.benign[static_cast<std::size_t>(i)];
      mean /= m;
      double ss = 0.0;
      for (int i = 0; i < m; ++i) {
        double d = s.watermarked[static_cast<std::size_t>(i)] -
                   s.benign[static_cast<std::size_t>(i)];
        ss += (d - mean) * (d - mean);
      }
      double t_hand = (mean - tau) * std::sqrt(static_cast<double>(m)) /
                      std::sqrt(ss / (m - 1));
      worst_t = std::max(worst_t,
                         std::fabs(r.statistic - t_hand) /
                             std::max(std::fabs(t_hand), 1e-300));
    }
    if (worst_t > 1e-12) pass = false;
    detail += "paired-t worst rel=" + fmt(worst_t);
    record(8, "statistical kernel oracles", pass, detail);
  }

  // 9. Trainer gradient check.
  {
    Rng rng(4242);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      int d_in = 2 + rng.uniform_int(7);
      int k = 2 + rng.uniform_int(3);
      int hidden = 2 + rng.uniform_int(7);
      int n = 3 + rng.uniform_int(10);
      double l2 = trial % 2 == 0 ? 1e-3 : 0.0;
      MlpParams p = init_mlp({d_in, hidden, k}, rng.next_u64());
      MatrixX x(n, d_in);
      std::vector<int> y;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d_in; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
        y.push_back(rng.uniform_int(k));
      }
      auto grads = mlp_loss_gradients(p, x, y, l2);
      const double h = 1e-6;
      auto check_coord = [&](double& theta, double analytic) {
        double saved = theta;
        theta = saved + h;
        double up = mlp_loss(p, x, y, l2);
        theta = saved - h;
        double down = mlp_loss(p, x, y, l2);
        theta = saved;
        double numeric = (up - down) / (2.0 * h);
        double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-8});
        worst = std::max(worst, std::fabs(numeric - analytic) / denom);
      };
      for (std::size_t l = 0; l < p.num_layers(); ++l) {
        for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r) {
          for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c)
            check_coord(p.weights[l](r, c), grads.weights[l](r, c));
        }
        for (Eigen::Index r = 0; r < p.biases[l].size(); ++r)
          check_coord(p.biases[l][r], grads.biases[l][r]);
      }
    }
    record(9, "trainer gradient check (rel err <= 1e-4)", worst <= 1e-4,
           "worst rel=" + fmt(worst));
  }

  // 10. Pipeline invariants: exact poisoning counts, exact query budgets,
  //     and local-versus-remote verdict equality.
  {
    bool pass = true;
    std::string detail;

    auto spec = spec_for(Modality::Tensor, ScenarioKind::Steal);
    Dataset full = spec.data.synthesize(mix64(spec.seed, 0));
    auto split = stratified_split(full, {spec.data.train_fraction, mix64(spec.seed, 1)});
    auto trig = make_trigger_preset("patch-line", full.meta, mix64(spec.seed, 2));
    int y_t = spec.resolved_target_label();
    auto wm = watermark_dataset(split.train, trig, y_t, spec.gamma, mix64(spec.seed, 3));
    auto expected =
        static_cast<int>(std::lround(spec.gamma * static_cast<double>(split.train.size())));
    if (static_cast<int>(wm.manifest.modified_indices.size()) != expected) pass = false;
    std::set<int> modified(wm.manifest.modified_indices.begin(),
                           wm.manifest.modified_indices.end());
    for (std::size_t i = 0; i < split.train.size(); ++i) {
      if (modified.count(static_cast<int>(i))) {
        if (wm.poisoned.samples[i].label != y_t) pass = false;
      } else if (!(wm.poisoned.samples[i] == split.train.samples[i])) {
        pass = false;
      }
    }
    detail += "poisoned " + std::to_string(wm.manifest.modified_indices.size()) +
              "/" + std::to_string(split.train.size()) + "; ";

    const auto& steal = lab.at("tensor/steal");
    if (steal.probability_verdict.queries_total != 2 * spec.verify.m) pass = false;
    if (steal.label_only_verdict.queries_total != spec.verify.m) pass = false;
    detail += "queries " + std::to_string(steal.probability_verdict.queries_total) +
              "/" + std::to_string(steal.label_only_verdict.queries_total) + "; ";

    TrainConfig cfg = spec.train;
    cfg.seed = mix64(spec.seed, 5);
    Featurizer feat = spec.data.featurizer();
    auto marked = train(wm.poisoned, feat, cfg).params;
    VerificationConfig vcfg = spec.verify;
    vcfg.seed = mix64(spec.seed, 6);
    auto local = SuspectHandle::local(marked, feat, QueryMode::Probability);
    auto local_verdict = verify_probability(split.test, trig, y_t, local, vcfg);

    MockModelServer server(marked, feat);
    int port = server.start();
    RemoteEndpoint ep;
    ep.base_url = "http://127.0.0.1:" + std::to_string(port);
    ep.num_classes = full.meta.num_classes;
    ep.max_batch = 32;
    auto remote = SuspectHandle::remote(ep, QueryMode::Probability);
    auto remote_verdict = verify_probability(split.test, trig, y_t, remote, vcfg);
    server.stop();

    bool verdicts_equal =
        local_verdict.p_value == remote_verdict.p_value &&
        *local_verdict.delta_p == *remote_verdict.delta_p &&
        local_verdict.trained_on_dataset == remote_verdict.trained_on_dataset;
    if (!verdicts_equal) pass = false;
    detail += std::string("local==remote verdict: ") +
              (verdicts_equal ? "yes" : "NO");
    record(10, "pipeline invariants (counts, query budget, local==remote)", pass,
           detail);
  }

  // 11. Determinism: re-running from the echoed config reproduces the report
  //     bit-identically.
  {
    const auto& first = lab.at("tensor/steal");
    auto second = run_scenario(ScenarioSpec::from_json(first.spec_echo));
    auto a = first.to_json();
    auto b = second.to_json();
    bool pass = a["spec"] == b["spec"] && a["results"] == b["results"];
    record(11, "determinism (re-run reproduces all numeric fields)", pass,
           pass ? "bit-identical" : "MISMATCH");
  }

  bool all_pass = true;
  for (const auto& g : gates) {
    std::printf("[%s] criterion %2d: %s — %s\n", g.pass ? "PASS" : "FAIL", g.id,
                g.name.c_str(), g.detail.c_str());
    if (!g.pass) all_pass = false;
  }
  std::printf("%s\n", all_pass ? "ACCEPTANCE: all criteria passed"
                               : "ACCEPTANCE: FAILURES PRESENT");
  return all_pass ? 0 : 1;
}
