// One PASS/FAIL line per acceptance criterion; exit status is the number of failures.
#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

#include "oodlab/engine.hpp"
#include "oodlab/kernel_pca.hpp"
#include "oodlab/metrics.hpp"
#include "oodlab/pipeline.hpp"
#include "oodlab/projections.hpp"
#include "oodlab/proximity.hpp"
#include "oodlab/ranking.hpp"
#include "oodlab/registry.hpp"
#include "oodlab/synthetic.hpp"
#include "oracles.hpp"

using namespace oodlab;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

Matrix gaussian(Index n, Index d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(n, d);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(4);
  s << x;
  return s.str();
}

// ---------------------------------------------------------------- proximity

struct PublishedSource {
  std::string name;
  // (MMD, FD, d_IT, d_NC) as tabulated, then the expected bucket.
  std::vector<std::tuple<std::string, std::array<double, 4>, Bucket>> rows;
};

std::vector<PublishedSource> published_tables() {
  const Bucket N = Bucket::Near, M = Bucket::Mid, F = Bucket::Far;
  return {
      {"CIFAR-10",
       {{"CIFAR-100", {.0002, .1592, .7885, .8085}, N}, {"TinyImagenet", {.0009, .3233, .8060, .9256}, N},
        {"iSUN", {.0015, .4890, .7943, .8393}, M},      {"LSUN(r)", {.0016, .5248, .8045, .8634}, M},
        {"LSUN(c)", {.0015, .5129, .7797, .8168}, M},   {"SVHN", {.0020, .7009, .7744, .8607}, M},
        {"Places365", {.0021, .6379, .8337, 1.1471}, F}, {"Textures", {.0020, .6698, .8231, 1.0647}, F}}},
      {"SuperCIFAR-100",
       {{"CIFAR-10", {.0002, .1705, .7701, .7511}, N}, {"TinyImagenet", {.0008, .2307, .7840, .8738}, N},
        {"iSUN", {.0012, .3856, .7607, .7425}, M},     {"LSUN(r)", {.0013, .4244, .7625, .7720}, M},
        {"LSUN(c)", {.0011, .3999, .7696, .7351}, M},  {"SVHN", {.0017, .6208, .7566, .8012}, M},
        {"Places365", {.0020, .5562, .7939, 1.0964}, F}, {"Textures", {.0016, .5246, .7980, 1.0003}, F}}},
      {"CIFAR-100",
       {{"CIFAR-10", {.0002, .1590, .7494, .7268}, N}, {"TinyImagenet", {.0008, .2235, .7512, .8436}, N},
        {"iSUN", {.0012, .3829, .7484, .7128}, M},     {"LSUN(r)", {.0013, .4204, .7562, .7388}, M},
        {"LSUN(c)", {.0011, .3999, .7364, .7120}, M},  {"SVHN", {.0017, .6222, .7511, .7789}, M},
        {"Places365", {.0019, .5456, .7752, 1.0568}, F}, {"Textures", {.0016, .5232, .7613, .9780}, F}}},
      {"TinyImagenet",
       {{"CIFAR-100", {.0008, .2224, .7279, .7956}, N}, {"CIFAR-10", {.0009, .3220, .7288, .7979}, N},
        {"iSUN", {.0012, .3808, .7468, .7063}, N},      {"LSUN(r)", {.0013, .4039, .7500, .7186}, N},
        {"LSUN(c)", {.0016, .4989, .7406, .7503}, N},   {"Places365", {.0014, .3887, .7645, .9846}, M},
        {"Textures", {.0014, .4697, .7528, .9317}, M},  {"SVHN", {.0025, .7948, .7409, .8726}, F}}},
  };
}

Check proximity_reproduction() {
  Check c;
  const auto t0 = Clock::now();
  int exact = 0, one_off = 0;
  std::string summary;
  for (const PublishedSource& src : published_tables()) {
    std::vector<ProximityVector> sets;
    for (const auto& [name, t, _] : src.rows) sets.push_back({name, {t[1], t[0], t[3], t[2]}});
    const BucketResult r = bucketize(sets);
    int wrong = 0;
    for (std::size_t i = 0; i < src.rows.size(); ++i) wrong += r.buckets[i] != std::get<2>(src.rows[i]) ? 1 : 0;
    exact += wrong == 0 ? 1 : 0;
    one_off += wrong == 1 ? 1 : 0;
    summary += " " + src.name + ":" + std::to_string(wrong);
  }
  const double secs = seconds_since(t0);
  c.expect(exact >= 3 && exact + one_off == 4, "mismatches per source" + summary);
  c.expect(secs < 1.0, "runtime " + fmt(secs) + " s");
  if (c.ok) c.detail = std::to_string(exact) + "/4 sources exact, " + fmt(secs) + " s";
  return c;
}

// ---------------------------------------------------------------- metrics

Check metric_oracle() {
  Check c;
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    std::uniform_int_distribution<int> size(2, 500);
    const int n = size(rng);
    const int levels = 2 + t % 50;
    std::uniform_int_distribution<int> lv(0, levels - 1);
    std::bernoulli_distribution fail(0.05 + 0.9 * (t % 10) / 10.0);
    std::vector<LabeledOutcome> o(static_cast<std::size_t>(n));
    for (auto& x : o) {
      x.confidence = lv(rng) / static_cast<double>(levels);
      x.failure = fail(rng);
    }
    if (std::none_of(o.begin(), o.end(), [](const LabeledOutcome& x) { return x.failure; })) o[0].failure = true;
    if (std::all_of(o.begin(), o.end(), [](const LabeledOutcome& x) { return x.failure; })) o[1].failure = false;

    const auto [sel, gen] = oracle::risks_recount(o);
    const double a = aurc(o), g = augrc(o);
    std::vector<double> pos, neg;
    for (const auto& x : o) (x.failure ? neg : pos).push_back(x.confidence);
    const Vector vp = Eigen::Map<const Vector>(pos.data(), static_cast<Index>(pos.size()));
    const Vector vn = Eigen::Map<const Vector>(neg.data(), static_cast<Index>(neg.size()));
    const double roc = auroc(vp, vn), fpr = fpr_at_tpr(vp, vn, 0.95);
    const double errs[] = {std::abs(a - sel), std::abs(g - gen), std::abs(roc - oracle::auroc_pairs(pos, neg)),
                           std::abs(fpr - oracle::fpr_scan(pos, neg, 0.95))};
    for (double e : errs) worst = std::max(worst, e);
    c.expect(g <= a + 1e-15, "AUGRC > AURC on instance " + std::to_string(t));
  }
  c.expect(worst <= 1e-12, "max deviation " + fmt(worst));
  if (c.ok) c.detail = "200 instances, max deviation " + fmt(worst);
  return c;
}

// ---------------------------------------------------------------- statistics

Check statistics_oracle() {
  Check c;
  const auto t0 = Clock::now();
  BlockTable table;
  table.values = Matrix(3, 3);
  table.values << 1, 2, 3, 1, 2, 3, 1, 2, 3;
  table.block_keys = {"a", "b", "c"};
  table.method_ids = {"x", "y", "z"};
  const FriedmanResult f = friedman(rank_blocks(table));
  c.expect(std::abs(f.q - 6.0) < 1e-12, "Q = " + fmt(f.q));
  c.expect(std::abs(conover_se(3, 3) - std::sqrt(2.0 / 3.0)) < 1e-15, "SE mismatch");
  const std::vector<double> p{0.01, 0.04, 0.03};
  const auto adj = holm_adjust(p);
  c.expect(std::abs(adj[0] - 0.03) < 1e-15 && std::abs(adj[1] - 0.06) < 1e-15 && std::abs(adj[2] - 0.06) < 1e-15,
           "Holm fixture mismatch");
  std::mt19937_64 rng(77);
  int agree = 0;
  for (int t = 0; t < 200; ++t) {
    const Index n = 1 + t % 12;
    std::bernoulli_distribution coin(0.2 + 0.6 * ((t / 12) % 4) / 3.0);
    Graph g(n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        if (coin(rng)) g.connect(i, j);
      }
    }
    agree += bron_kerbosch(g) == oracle::maximal_cliques_bruteforce(g.adjacency) ? 1 : 0;
  }
  c.expect(agree == 200, std::to_string(200 - agree) + " graphs disagree with enumeration");
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, "runtime " + fmt(secs) + " s");
  if (c.ok) c.detail = "Q=6, SE=sqrt(2/3), Holm fixture, 200/200 graphs, " + fmt(secs) + " s";
  return c;
}

// ---------------------------------------------------------------- detector separation

Check detector_separation() {
  Check c;
  SyntheticOptions o;
  o.seed = 7;
  const SyntheticBenchmark b = make_synthetic(o);
  const ScoringEngine engine(b.train, b.head);
  const Matrix test_logits = engine.logits_of(b.test);
  const FeatureSet& ood = b.ood.front();
  double worst_auroc = 1.0;
  std::string worst_name;
  std::vector<std::string> below;
  double best_prob = INFINITY, best_geo = INFINITY;
  int pairs = 0;
  for (const MethodInfo& m : method_registry()) {
    for (Variant v : m.variants) {
      const Vector id = engine.score(m.id, v, b.test).confidence();
      const Vector od = engine.score(m.id, v, ood).confidence();
      const double a = auroc(id, od);
      ++pairs;
      if (a < 0.9) below.push_back(std::string(m.id) + "@" + std::string(to_string(v)) + "=" + fmt(a));
      if (a < worst_auroc) {
        worst_auroc = a;
        worst_name = std::string(m.id) + "@" + std::string(to_string(v));
      }
      const double g = evaluate_outcomes(build_protocol(id, *b.test.labels, test_logits, &od, Protocol::OODDetection)).augrc;
      if (m.family == MethodFamily::Probability) best_prob = std::min(best_prob, g);
      if (m.family == MethodFamily::Feature || m.family == MethodFamily::Reconstruction) best_geo = std::min(best_geo, g);
    }
  }
  std::string listed;
  for (const std::string& b : below) listed += " " + b;
  c.expect(below.empty(), std::to_string(below.size()) + " of " + std::to_string(pairs) + " pairs below AUROC 0.9:" + listed);
  c.expect(std::abs(best_prob - best_geo) <= 10.0,
           "best AUGRC probability " + fmt(best_prob) + " vs geometry " + fmt(best_geo) + " milli");
  const std::string augrc_note = "best AUGRC probability " + fmt(best_prob) + " vs geometry " + fmt(best_geo) + " milli";
  if (c.ok) {
    c.detail = std::to_string(pairs) + " method/variant pairs, min AUROC " + fmt(worst_auroc) + " (" + worst_name + "), " +
               augrc_note;
  } else {
    c.detail += "; " + augrc_note;
  }
  return c;
}

// ---------------------------------------------------------------- identities

Check numerical_identities() {
  Check c;
  std::mt19937_64 rng(31);
  double grad_rel = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index classes = 2 + t % 5, dim = 3 + t % 7;
    const Matrix w = gaussian(classes, dim, rng);
    const Vector bias = gaussian(classes, 1, rng).col(0);
    const Vector h = gaussian(dim, 1, rng, 2.0).col(0);
    HyperParams hp;
    hp.norm_order = 1 + t % 2;
    const Vector p = softmax(w * h + bias);
    const double closed = score_gradnorm(h, p, hp);
    const double fd = oracle::gradnorm_fd(w, bias, h, hp.norm_order);
    grad_rel = std::max(grad_rel, std::abs(closed - fd) / std::max(std::abs(fd), 1e-12));
  }
  c.expect(grad_rel <= 1e-4, "GradNorm relative error " + fmt(grad_rel));

  const Matrix train = gaussian(300, 8, rng) * gaussian(8, 8, rng);
  ClassifierHead head;
  head.weights = gaussian(3, 8, rng);
  head.bias = Vector::Zero(3);
  const ResidualModel model = ResidualModel::fit(train, head.logits(train), 0.8);
  double vim_err = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Vector h = gaussian(8, 1, rng, 3.0).col(0);
    const Vector l = head.logits(h);
    const ResidualScores s = score_residual_vim_neco(h, l, model);
    Vector aug(4);
    aug << l, model.vim_alpha * s.residual;
    vim_err = std::max(vim_err, std::abs(s.vim - static_cast<double>(oracle::softmax_ld(aug)[3])));
  }
  c.expect(vim_err <= 1e-8, "ViM identity error " + fmt(vim_err));

  double energy_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Vector l = gaussian(5, 1, rng, 4.0).col(0);
    const double shift = std::uniform_real_distribution<double>(-100.0, 100.0)(rng);
    const double temp = 0.5 + t % 4;
    const double e0 = score_logit_family(LogitScore::Energy, l, temp);
    const double e1 = score_logit_family(LogitScore::Energy, (l.array() + shift).matrix(), temp);
    energy_err = std::max(energy_err, std::abs(e1 - (e0 - shift)));
  }
  c.expect(energy_err <= 1e-9, "Energy shift error " + fmt(energy_err));

  const Subspace s = fit_pca(gaussian(400, 12, rng) * gaussian(12, 12, rng), 0.9);
  const Matrix& basis = s.basis;
  const Matrix proj = basis * basis.transpose();
  const double idem = (proj * proj - proj).cwiseAbs().maxCoeff();
  const double ortho = (basis.transpose() * basis - Matrix::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff();
  c.expect(idem <= 1e-8 && ortho <= 1e-8, "projector error " + fmt(std::max(idem, ortho)));
  double in_span = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Vector h = s.mean + basis * gaussian(basis.cols(), 1, rng).col(0);
    in_span = std::max(in_span, std::abs(pca_rec_error(s, h)));
  }
  c.expect(in_span <= 1e-8, "pca_rec_error on in-subspace points " + fmt(in_span));

  const Matrix x = gaussian(200, 8, rng);
  KpcaOptions ko;
  ko.sigma = median_bandwidth(x, 0);
  ko.components = 10;
  const KpcaModel exact = fit_kpca(x, ko);
  ko.mode = KpcaMode::Nystrom;
  ko.landmarks = 200;
  ko.landmark_rule = LandmarkRule::Uniform;
  const KpcaModel ny = fit_kpca(x, ko);
  const double kgap = (kpca_rec_errors(exact, x, false) - kpca_rec_errors(ny, x, false)).cwiseAbs().maxCoeff();
  c.expect(kgap <= 1e-4, "Nystrom vs exact gap " + fmt(kgap));

  if (c.ok) {
    c.detail = "GradNorm " + fmt(grad_rel) + ", ViM " + fmt(vim_err) + ", Energy " + fmt(energy_err) + ", projector " +
               fmt(std::max(idem, ortho)) + ", Nystrom " + fmt(kgap) + ", in-span " + fmt(in_span);
  }
  return c;
}

// ---------------------------------------------------------------- determinism

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

Check determinism() {
  Check c;
  const auto t0 = Clock::now();
  const fs::path scratch = fs::temp_directory_path() / "oodlab-acceptance";
  fs::remove_all(scratch);
  const fs::path bundled = fs::path(OODLAB_SOURCE_DIR) / "configs" / "synthetic.json";
  const fs::path fixture_config = write_fixture(scratch / "fixture", 7);
  std::size_t files = 0;
  for (const auto& [label, path] : {std::pair{"bundled", bundled}, std::pair{"fixture", fixture_config}}) {
    std::vector<std::map<std::string, std::string>> runs;
    for (int run = 0; run < 2; ++run) {
      const fs::path out = scratch / (std::string(label) + "-run" + std::to_string(run));
      const ExperimentConfig config = load_config(path);
      write_reports(run_pipeline(config), config, out);
      runs.push_back(read_tree(out));
    }
    c.expect(runs[0].size() >= 7, std::string(label) + ": only " + std::to_string(runs[0].size()) + " report files");
    c.expect(runs[0] == runs[1], std::string(label) + ": reports differ between runs");
    files += runs[0].size();
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 120.0, "runtime " + fmt(secs) + " s");
  if (c.ok) c.detail = std::to_string(files) + " report files byte-identical across runs, " + fmt(secs) + " s";
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"proximity reproduction", proximity_reproduction},
      {"metric oracle equivalence", metric_oracle},
      {"statistics oracle", statistics_oracle},
      {"detector separation", detector_separation},
      {"numerical identities", numerical_identities},
      {"determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Check c;
    try {
      c = run();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    failures += c.ok ? 0 : 1;
    std::cout << (c.ok ? "PASS" : "FAIL") << "  " << name << ": " << c.detail << std::endl;
  }
  return failures;
}
