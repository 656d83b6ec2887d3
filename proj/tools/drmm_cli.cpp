// Copyright 2026 The DRMM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// drmm: train, sample, evaluate and benchmark deep residual mixture models.
//
// Exit codes: 0 success, 2 usage or input error, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "drmm/drmm.hpp"

namespace fs = std::filesystem;
using namespace drmm;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

void check_output_path(const std::string& path) {
  if (path.empty()) return;
  fs::path p(path);
  fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  if (!fs::is_directory(dir)) throw InputError("output directory '" + dir.string() + "' does not exist");
}

std::vector<double> parse_numbers(const std::string& text, std::size_t expect, const char* what) {
  auto f = detail::split_fields(text);
  if (expect && f.size() != expect)
    throw InputError(std::string(what) + " '" + text + "' needs " + std::to_string(expect) + " comma-separated numbers");
  std::vector<double> out;
  for (const auto& t : f) out.push_back(detail::parse_double(t, text));
  return out;
}

std::string join_header(const std::vector<std::string>& cols, bool with_score) {
  std::string h;
  for (std::size_t i = 0; i < cols.size(); ++i) h += (i ? "," : "") + cols[i];
  if (with_score) h += cols.empty() ? "score" : ",score";
  return h + "\n";
}

std::vector<std::string> model_columns(const DrmmModel& m) {
  if (!m.columns.empty()) return m.columns;
  std::vector<std::string> c;
  for (std::size_t i = 0; i < m.real_dims(); ++i) c.push_back("x" + std::to_string(i));
  return c;
}

std::string samples_to_csv(const DrmmModel& m, const SampleResult& r, bool with_score) {
  std::string out = join_header(model_columns(m), with_score);
  for (std::size_t s = 0; s < r.size(); ++s) {
    for (std::size_t i = 0; i < r.values[s].size(); ++i) out += (i ? "," : "") + format_double(r.values[s][i]);
    if (with_score) out += "," + format_double(r.log_scores[s]);
    out += "\n";
  }
  return out;
}

Bounds parse_bounds(const std::string& text) {
  auto v = parse_numbers(text, 4, "bounds");
  Bounds b{v[0], v[1], v[2], v[3]};
  b.validate();
  return b;
}

Bounds auto_bounds(const std::vector<std::array<double, 2>>& pts) {
  Bounds b{-1, 1, -1, 1};
  if (pts.empty()) return b;
  b = {pts[0][0], pts[0][0], pts[0][1], pts[0][1]};
  for (const auto& p : pts) {
    b.xmin = std::min(b.xmin, p[0]);
    b.xmax = std::max(b.xmax, p[0]);
    b.ymin = std::min(b.ymin, p[1]);
    b.ymax = std::max(b.ymax, p[1]);
  }
  double px = b.xmax > b.xmin ? 0.05 * (b.xmax - b.xmin) : 0.5;
  double py = b.ymax > b.ymin ? 0.05 * (b.ymax - b.ymin) : 0.5;
  return {b.xmin - px, b.xmax + px, b.ymin - py, b.ymax + py};
}

/// Shared sampling/conditioning flags.
struct CondFlags {
  std::vector<std::string> given, confidence, ineq, eq, box, prior;
  std::string conditions_file;

  void add(CLI::App* sub) {
    sub->add_option("--given", given, "Known variable i=v (raw units); repeatable");
    sub->add_option("--confidence", confidence, "Multiplier for a known variable i=m (default 1); repeatable");
    sub->add_option("--ineq", ineq, "Inequality a1,...,aD,b meaning a.x + b > 0; repeatable");
    sub->add_option("--eq", eq, "Equality a1,...,aD,b meaning a.x + b = 0; repeatable");
    sub->add_option("--box", box, "Box i,lower,upper (empty field = unbounded); repeatable");
    sub->add_option("--prior", prior, "Gaussian prior i,mean,std; repeatable");
    sub->add_option("--conditions", conditions_file, "File with 'ineq:', 'eq:', 'box:', 'prior:' lines")
        ->check(CLI::ExistingFile);
  }

  void apply(SampleRequest& req, std::size_t D) const {
    auto parse_assign = [&](const std::string& tok, const char* what) {
      auto eqpos = tok.find('=');
      if (eqpos == std::string::npos) throw InputError(std::string(what) + " '" + tok + "' must be i=value");
      std::size_t i = detail::parse_index(detail::trim(tok.substr(0, eqpos)), tok);
      if (i >= D)
        throw InputError(std::string(what) + " '" + tok + "' refers to variable " + std::to_string(i) + " of " +
                         std::to_string(D));
      return std::pair{i, detail::parse_double(detail::trim(tok.substr(eqpos + 1)), tok)};
    };
    if (!given.empty() || !confidence.empty()) req.known.resize(D);
    for (const auto& g : given) {
      auto [i, v] = parse_assign(g, "--given");
      req.known[i] = v;
    }
    if (!confidence.empty()) {
      req.confidence.assign(D, 1.0);
      for (const auto& c : confidence) {
        auto [i, v] = parse_assign(c, "--confidence");
        if (!req.known[i]) throw InputError("--confidence '" + c + "' names a variable without --given");
        req.confidence[i] = v;
      }
    }
    if (!conditions_file.empty()) {
      auto spec = parse_conditions(read_file(conditions_file));
      auto& c = req.conditions;
      c.ineqs.insert(c.ineqs.end(), spec.ineqs.begin(), spec.ineqs.end());
      c.eqs.insert(c.eqs.end(), spec.eqs.begin(), spec.eqs.end());
      c.boxes.insert(c.boxes.end(), spec.boxes.begin(), spec.boxes.end());
      c.priors.insert(c.priors.end(), spec.priors.begin(), spec.priors.end());
    }
    for (const auto& t : ineq) req.conditions.ineqs.push_back(parse_linear(t));
    for (const auto& t : eq) req.conditions.eqs.push_back(parse_linear(t));
    for (const auto& t : box) req.conditions.boxes.push_back(parse_box(t));
    for (const auto& t : prior) req.conditions.priors.push_back(parse_prior(t));
  }
};

struct TrainFlags {
  int layers = 3, components = 8, iters = 3000, batch = 64, log_every = 100;
  std::optional<double> lr;
  double reg_alpha = 0.1, trunc_train = 0.5;

  void add(CLI::App* sub, bool with_shape = true) {
    if (with_shape) {
      sub->add_option("--layers", layers, "Number of layers L")->check(CLI::PositiveNumber);
      sub->add_option("--components", components, "Components per layer K")->check(CLI::PositiveNumber);
    }
    sub->add_option("--iters", iters, "Training iterations (split into three equal stages)")->check(CLI::Range(3, 1 << 30));
    sub->add_option("--lr", lr, "Base learning rate (default 0.005 for <= 3 variables, else 0.002)");
    sub->add_option("--batch", batch, "Minibatch size")->check(CLI::PositiveNumber);
    sub->add_option("--reg-alpha", reg_alpha, "Orphan regularizer weight");
    sub->add_option("--trunc-train", trunc_train, "Training-time sampling truncation")->check(CLI::Range(0.0, 1.0));
  }
  TrainConfig config(std::uint64_t seed) const {
    TrainConfig c;
    c.total_iters = iters;
    c.batch_size = batch;
    c.lr = lr;
    c.reg_alpha = reg_alpha;
    c.train_trunc = trunc_train;
    c.seed = seed;
    c.log_every = log_every;
    return c;
  }
};

std::string train_log_header() { return "iter,stage,lr,loss,loglik\n"; }

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"Deep residual mixture models: training, conditional sampling and evaluation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset (sierpinski, grid9, two_spirals, ik)");
  std::string gen_kind, gen_out, gen_skel;
  std::size_t gen_n = 10000;
  std::uint64_t gen_seed = 0;
  gen->add_option("kind", gen_kind, "Dataset kind")->required()->check(CLI::IsMember({"sierpinski", "grid9", "two_spirals", "ik"}));
  gen->add_option("--n", gen_n, "Number of rows")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--out", gen_out, "Output CSV")->required();
  gen->add_option("--skeleton", gen_skel, "Skeleton description file (ik only)")->check(CLI::ExistingFile);

  // train
  auto* tr = app.add_subcommand("train", "Train a model on a CSV dataset");
  std::string tr_data, tr_out, tr_log;
  std::uint64_t tr_seed = 0;
  TrainFlags tf;
  tr->add_option("--data", tr_data, "Training CSV")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", tr_out, "Model file to write")->required();
  tr->add_option("--log", tr_log, "Training log CSV (default: <out>.log)");
  tr->add_option("--log-every", tf.log_every, "Iterations between log records")->check(CLI::PositiveNumber);
  tr->add_option("--seed", tr_seed, "Random seed");
  tf.add(tr);

  // sample
  auto* sa = app.add_subcommand("sample", "Draw (conditional) samples from a model");
  std::string sa_model, sa_out, sa_image, sa_bounds;
  std::size_t sa_n = 64, sa_top = 0;
  double sa_trunc = kDefaultSampleTrunc;
  bool sa_noise = false, sa_scores = false;
  int sa_score_samples = 0;
  std::uint64_t sa_seed = 0;
  CondFlags sa_cf;
  sa->add_option("--model", sa_model, "Model file")->required()->check(CLI::ExistingFile);
  sa->add_option("--n", sa_n, "Number of samples")->check(CLI::PositiveNumber);
  sa->add_option("--out", sa_out, "Output CSV")->required();
  sa->add_option("--trunc", sa_trunc, "Sampling truncation threshold")->check(CLI::Range(0.0, 1.0));
  sa->add_flag("--noise", sa_noise, "Add last-layer Gaussian noise to unknown variables");
  sa->add_option("--top-k", sa_top, "Keep the k highest-scoring samples (adds a score column)");
  sa->add_flag("--scores", sa_scores, "Add a score column");
  sa->add_option("--score-samples", sa_score_samples, "Score with this many importance samples instead of the drawn path");
  sa->add_option("--seed", sa_seed, "Random seed");
  sa->add_option("--image", sa_image, "Scatter plot of the first two variables (PPM)");
  sa->add_option("--bounds", sa_bounds, "Plot bounds xmin,xmax,ymin,ymax (default: fit samples)");
  sa_cf.add(sa);

  // density
  auto* de = app.add_subcommand("density", "Log-density on a regular 2D grid");
  std::string de_model, de_grid, de_out, de_image;
  int de_samples = 32;
  double de_trunc = 0.0;
  bool de_exact = false, de_compare = false;
  std::uint64_t de_seed = 0;
  de->add_option("--model", de_model, "Model file (2 real variables)")->required()->check(CLI::ExistingFile);
  de->add_option("--grid", de_grid, "xmin,xmax,ymin,ymax,res (res cells per axis)")->required();
  de->add_option("--samples", de_samples, "Importance samples per cell")->check(CLI::PositiveNumber);
  de->add_option("--trunc", de_trunc, "Proposal truncation for the estimate")->check(CLI::Range(0.0, 1.0));
  de->add_flag("--exact", de_exact, "Enumerate all latent paths instead of sampling");
  de->add_flag("--compare", de_compare, "Also compute the other method and report the max abs log difference");
  de->add_option("--seed", de_seed, "Random seed");
  de->add_option("--out", de_out, "Output CSV x,y,loglik")->required();
  de->add_option("--image", de_image, "Heatmap image (PPM)");

  // eval
  auto* ev = app.add_subcommand("eval", "k-NN precision, recall and F1 of a sample set against data");
  std::string ev_real, ev_fake, ev_out;
  int ev_k = 3;
  ev->add_option("--real", ev_real, "Reference CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--fake", ev_fake, "Generated CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--k", ev_k, "Neighbor count")->check(CLI::PositiveNumber);
  ev->add_option("--out", ev_out, "Output JSON (default: stdout only)");

  // bench
  auto* be = app.add_subcommand("bench", "Depth-versus-size benchmark");
  std::string be_data, be_grid = "1x64,1x128,1x256,2x24,3x16,4x12", be_out;
  std::size_t be_eval = 20000, be_every = 10;
  std::uint64_t be_seed = 0;
  TrainFlags bf;
  be->add_option("--data", be_data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  be->add_option("--grid", be_grid, "Configurations LxK, comma-separated");
  be->add_option("--eval-n", be_eval, "Samples and data rows used for F1")->check(CLI::PositiveNumber);
  be->add_option("--holdout-every", be_every, "Every n-th row is held out")->check(CLI::Range(2, 1 << 30));
  be->add_option("--seed", be_seed, "Random seed");
  be->add_option("--out", be_out, "Output CSV")->required();
  bf.add(be, false);

  // ik-demo
  auto* ik = app.add_subcommand("ik-demo", "Train or load a skeleton model and sample poses for goals");
  std::string ik_data, ik_model, ik_model_out, ik_out, ik_image, ik_skel;
  std::size_t ik_n = 64, ik_top = 10, ik_data_n = 100000;
  double ik_goal_sigma = 0.0, ik_trunc = kDefaultSampleTrunc;
  std::uint64_t ik_seed = 0;
  std::map<std::string, std::string> goals;
  TrainFlags itf;
  itf.layers = 4;
  itf.components = 64;
  itf.iters = 50000;
  CondFlags ik_cf;
  ik->add_option("--data", ik_data, "Pose CSV (default: generate --data-n rows)")->check(CLI::ExistingFile);
  ik->add_option("--data-n", ik_data_n, "Rows to generate when no --data is given")->check(CLI::PositiveNumber);
  ik->add_option("--model", ik_model, "Load this model instead of training")->check(CLI::ExistingFile);
  ik->add_option("--model-out", ik_model_out, "Save the trained model");
  ik->add_option("--skeleton", ik_skel, "Skeleton description file")->check(CLI::ExistingFile);
  for (const char* g : {"hand-l", "hand-r", "foot-l", "foot-r", "head", "com"})
    ik->add_option(std::string("--goal-") + g, goals[g], std::string("Goal x,y for the ") + g + " effector");
  ik->add_option("--goal-sigma", ik_goal_sigma, "Soft goals: Gaussian prior std instead of exact values");
  ik->add_option("--n", ik_n, "Poses to sample")->check(CLI::PositiveNumber);
  ik->add_option("--top-k", ik_top, "Poses kept after ranking");
  ik->add_option("--trunc", ik_trunc, "Sampling truncation threshold")->check(CLI::Range(0.0, 1.0));
  ik->add_option("--seed", ik_seed, "Random seed");
  ik->add_option("--out", ik_out, "Pose CSV")->required();
  ik->add_option("--image", ik_image, "Rendered poses (PPM)");
  itf.add(ik);
  ik_cf.add(ik);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  if (*gen) {
    check_output_path(gen_out);
    Dataset d;
    if (gen_kind == "sierpinski") d = gen_sierpinski(gen_n, gen_seed);
    else if (gen_kind == "grid9") d = gen_toy(ToyKind::Grid9, gen_n, gen_seed);
    else if (gen_kind == "two_spirals") d = gen_toy(ToyKind::TwoSpirals, gen_n, gen_seed);
    else d = gen_ik_dataset(gen_n, gen_seed, gen_skel.empty() ? default_skeleton() : parse_skeleton(read_file(gen_skel)));
    save_csv(d, gen_out);
    std::printf("wrote %zu rows x %zu columns to %s\n", d.n_rows(), d.n_cols(), gen_out.c_str());
    return 0;
  }

  if (*tr) {
    if (tr_log.empty()) tr_log = tr_out + ".log";
    check_output_path(tr_out);
    check_output_path(tr_log);
    Dataset d = load_csv(tr_data);
    std::string log = train_log_header();
    DrmmModel m = train(d, tf.layers, tf.components, tf.config(tr_seed),
                        [&](const TrainLogRecord& r) { log += format_log_record(r) + "\n"; });
    save_model(m, tr_out);
    write_file_atomic(tr_log, log);
    std::printf("trained L=%d K=%d on %zu rows; %llu parameters; wrote %s\n", tf.layers, tf.components, d.n_rows(),
                static_cast<unsigned long long>(param_count(m).exact), tr_out.c_str());
    return 0;
  }

  if (*sa) {
    check_output_path(sa_out);
    check_output_path(sa_image);
    std::optional<Bounds> bounds;
    if (!sa_bounds.empty()) bounds = parse_bounds(sa_bounds);
    DrmmModel m = load_model(sa_model);
    SampleRequest req;
    req.n = sa_n;
    req.trunc = sa_trunc;
    req.add_noise = sa_noise;
    req.seed = sa_seed;
    req.score_samples = sa_score_samples;
    sa_cf.apply(req, m.real_dims());
    if (sa_top > sa_n) throw InputError("--top-k exceeds --n");
    SampleResult r = sample(m, req);
    for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    if (sa_top) r = rank_samples(r, sa_top);
    write_file_atomic(sa_out, samples_to_csv(m, r, sa_top || sa_scores));
    if (!sa_image.empty()) {
      if (m.real_dims() < 2) throw InputError("--image needs a model with at least two variables");
      std::vector<std::array<double, 2>> pts;
      for (const auto& v : r.values) pts.push_back({v[0], v[1]});
      write_file_atomic(sa_image, render_scatter(pts, bounds ? *bounds : auto_bounds(pts)).to_ppm());
    }
    std::printf("wrote %zu samples to %s\n", r.size(), sa_out.c_str());
    return 0;
  }

  if (*de) {
    check_output_path(de_out);
    check_output_path(de_image);
    auto g = parse_numbers(de_grid, 5, "--grid");
    Bounds b{g[0], g[1], g[2], g[3]};
    b.validate();
    if (g[4] < 1 || g[4] != std::floor(g[4]) || g[4] > 4096) throw InputError("--grid resolution must be an integer in [1, 4096]");
    const int res = static_cast<int>(g[4]);
    DrmmModel m = load_model(de_model);
    if (m.real_dims() != 2 || m.input_specs.size() != 1) throw InputError("density needs a model of two real variables");
    double log_jac = -std::log(m.norm_stats.std[0]) - std::log(m.norm_stats.std[1]);
    auto eval_grid = [&](bool exact) {
      std::vector<double> out(static_cast<std::size_t>(res) * res);
      parallel_for(out.size(), [&](std::size_t c) {
        int ix = static_cast<int>(c % res), iy = static_cast<int>(c / res);
        double x = b.xmin + (ix + 0.5) * (b.xmax - b.xmin) / res;
        double y = b.ymin + (iy + 0.5) * (b.ymax - b.ymin) / res;
        Point p({m.norm_stats.apply(0, x), m.norm_stats.apply(1, y)});
        Rng rng(derive_seed(de_seed, c));
        out[c] = (exact ? exact_loglik(m, p) : estimate_loglik(m, p, de_samples, de_trunc, rng)) + log_jac;
      });
      return out;
    };
    auto vals = eval_grid(de_exact);
    std::string csv = "x,y,loglik\n";
    std::vector<std::vector<double>> grid(res, std::vector<double>(res));
    for (int iy = 0; iy < res; ++iy)
      for (int ix = 0; ix < res; ++ix) {
        double x = b.xmin + (ix + 0.5) * (b.xmax - b.xmin) / res;
        double y = b.ymin + (iy + 0.5) * (b.ymax - b.ymin) / res;
        double v = vals[static_cast<std::size_t>(iy) * res + ix];
        grid[iy][ix] = v;
        csv += format_double(x) + "," + format_double(y) + "," + format_double(v) + "\n";
      }
    write_file_atomic(de_out, csv);
    if (!de_image.empty()) write_file_atomic(de_image, render_heatmap(grid, std::max(1, 512 / res)).to_ppm());
    std::printf("wrote %dx%d %s log-density grid to %s\n", res, res, de_exact ? "exact" : "estimated", de_out.c_str());
    if (de_compare) {
      auto other = eval_grid(!de_exact);
      double worst = 0.0;
      for (std::size_t i = 0; i < vals.size(); ++i) worst = std::max(worst, std::abs(vals[i] - other[i]));
      std::printf("max abs log difference between exact and estimated grids: %.6g\n", worst);
    }
    return 0;
  }

  if (*ev) {
    check_output_path(ev_out);
    Dataset real = load_csv(ev_real), fake = load_csv(ev_fake);
    // keep the fake columns named like the real ones (drops e.g. a score column)
    if (fake.n_cols() != real.n_cols()) {
      std::vector<std::size_t> pick;
      for (const auto& c : real.columns) {
        auto it = std::find(fake.columns.begin(), fake.columns.end(), c);
        if (it == fake.columns.end())
          throw InputError("--fake lacks column '" + c + "' of --real");
        pick.push_back(static_cast<std::size_t>(it - fake.columns.begin()));
      }
      for (auto& r : fake.rows) {
        std::vector<double> sel;
        for (auto i : pick) sel.push_back(r[i]);
        r = std::move(sel);
      }
      fake.columns = real.columns;
    }
    NormStats ns = fit_normalizer(real);
    auto pr = knn_precision_recall(apply_normalizer(ns, real).rows, apply_normalizer(ns, fake).rows, ev_k);
    std::string json = "{\"precision\":" + format_double(pr.precision) + ",\"recall\":" + format_double(pr.recall) +
                       ",\"f1\":" + format_double(pr.f1) + ",\"k\":" + std::to_string(pr.k) +
                       ",\"n_real\":" + std::to_string(pr.n_real) + ",\"n_fake\":" + std::to_string(pr.n_fake) + "}\n";
    if (!ev_out.empty()) write_file_atomic(ev_out, json);
    std::printf("%s", json.c_str());
    return 0;
  }

  if (*be) {
    check_output_path(be_out);
    std::vector<BenchConfig> grid;
    for (const auto& tok : detail::split_fields(be_grid)) {
      auto x = tok.find('x');
      if (x == std::string::npos) throw InputError("--grid entry '" + tok + "' must be LxK");
      int L = static_cast<int>(detail::parse_index(tok.substr(0, x), tok));
      int K = static_cast<int>(detail::parse_index(tok.substr(x + 1), tok));
      if (L < 1 || K < 1) throw InputError("--grid entry '" + tok + "' needs L, K >= 1");
      grid.push_back({L, K});
    }
    Dataset d = load_csv(be_data);
    auto [train_d, held] = split_holdout(d, be_every);
    auto rows = depth_benchmark(train_d, held, grid, bf.config(be_seed), be_eval, be_seed, [](const BenchRow& r) {
      std::fprintf(stderr, "L=%d K=%d params=%llu f1=%.4f heldout_loglik=%.4f train_loglik=%.4f\n", r.layers,
                   r.components, static_cast<unsigned long long>(r.params), r.f1, r.loglik, r.train_loglik);
    });
    write_file_atomic(be_out, benchmark_to_csv(rows));
    std::printf("wrote %zu benchmark rows to %s\n", rows.size(), be_out.c_str());
    return 0;
  }

  if (*ik) {
    check_output_path(ik_out);
    check_output_path(ik_image);
    check_output_path(ik_model_out);
    Skeleton2D skel = ik_skel.empty() ? default_skeleton() : parse_skeleton(read_file(ik_skel));
    skel.validate();
    struct Goal { std::size_t col; std::array<double, 2> xy; };
    const std::map<std::string, std::size_t> effector_cols{
        {"hand-l", IkLayout::kHandL}, {"hand-r", IkLayout::kHandR}, {"foot-l", IkLayout::kFootL},
        {"foot-r", IkLayout::kFootR}, {"head", IkLayout::kHead},    {"com", IkLayout::kCom}};
    std::vector<Goal> gl;
    for (const auto& [name, text] : goals) {
      if (text.empty()) continue;
      auto v = parse_numbers(text, 2, ("--goal-" + name).c_str());
      gl.push_back({effector_cols.at(name), {v[0], v[1]}});
    }
    if (ik_top > ik_n) throw InputError("--top-k exceeds --n");
    DrmmModel m;
    if (!ik_model.empty()) {
      m = load_model(ik_model);
    } else {
      Dataset d = ik_data.empty() ? gen_ik_dataset(ik_data_n, ik_seed, skel) : load_csv(ik_data);
      m = train(d, itf.layers, itf.components, itf.config(ik_seed));
      if (!ik_model_out.empty()) save_model(m, ik_model_out);
    }
    if (m.real_dims() != ik_columns(skel).size())
      throw InputError("model has " + std::to_string(m.real_dims()) + " variables, the skeleton needs " +
                       std::to_string(ik_columns(skel).size()));
    SampleRequest req;
    req.n = ik_n;
    req.trunc = ik_trunc;
    req.seed = derive_seed(ik_seed, 0x1c);
    ik_cf.apply(req, m.real_dims());
    for (const auto& g : gl)
      for (int a = 0; a < 2; ++a) {
        if (ik_goal_sigma > 0.0) {
          req.conditions.priors.push_back({g.col + a, g.xy[a], ik_goal_sigma});
        } else {
          if (req.known.empty()) req.known.resize(m.real_dims());
          req.known[g.col + a] = g.xy[a];
        }
      }
    SampleResult r = sample(m, req);
    for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    r = rank_samples(r, ik_top ? ik_top : ik_n);
    write_file_atomic(ik_out, samples_to_csv(m, r, true));
    if (!ik_image.empty()) {
      std::vector<std::array<double, 2>> goal_pts;
      for (const auto& g : gl) goal_pts.push_back(g.xy);
      write_file_atomic(ik_image, render_skeletons(skel, r.values, goal_pts, {-1.8, 1.8, -0.5, 2.4}).to_ppm());
    }
    std::printf("wrote %zu poses to %s\n", r.size(), ik_out.c_str());
    return 0;
  }
  return kExitInput;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
}
