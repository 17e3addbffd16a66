#include "pdl/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;

struct Globals {
  std::string config_file;
  std::vector<std::string> settings;
  int workers = 0;
};

pdl::PipelineConfig load_config(const Globals& g) {
  pdl::PipelineConfig c;
  if (!g.config_file.empty()) pdl::apply_config_file(c, g.config_file);
  pdl::apply_environment(c);
  for (const auto& s : g.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw pdl::Error(pdl::ErrorCode::InvalidArgument, "--set expects key=value, got " + s);
    pdl::apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (g.workers > 0) c.workers = g.workers;
  return c;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw pdl::Error(pdl::ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

std::vector<int> parse_ints(const std::string& list) {
  std::vector<int> v;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) v.push_back(std::stoi(item));
  if (v.empty()) throw pdl::Error(pdl::ErrorCode::InvalidArgument, "empty list: " + list);
  return v;
}

json metrics_json(const pdl::MetricsVector& m) {
  json j;
  const auto v = m.values();
  for (int k = 0; k < pdl::kMetricCount; ++k) j[std::string(pdl::metric_names()[k])] = v[k];
  j["blocked_x"] = m.blocked_x;
  j["blocked_y"] = m.blocked_y;
  j["roughness_undefined"] = m.roughness_undefined;
  j["directionality_undefined"] = m.directionality_undefined;
  return j;
}

json vec(const pdl::Vec2& v) { return {v.x(), v.y()}; }

std::string history_csv(const pdl::nn::TrainHistory& h) {
  std::string out = "epoch,train_loss,validation_loss\n";
  for (std::size_t e = 0; e < h.train_loss.size(); ++e)
    out += std::to_string(e) + "," + pdl::format_double(h.train_loss[e]) + "," + pdl::format_double(h.validation_loss[e]) + "\n";
  return out;
}

void report_training(const pdl::nn::RegressionReport& r, pdl::nn::Model& model, const std::filesystem::path& out) {
  pdl::nn::save_checkpoint(model, out);
  auto hist = out;
  hist += ".history.csv";
  write_text(hist, history_csv(r.history));
  std::cout << "train/validation/test: " << r.split.train.size() << "/" << r.split.validation.size() << "/" << r.split.test.size()
            << "\nbest epoch " << r.history.best_epoch << (r.history.stopped_early ? " (early stop)" : "") << "\n"
            << "test MAE alpha_L " << r.test_mae[0] << " (mean predictor " << r.baseline_mae[0] << ")\n"
            << "test MAE alpha_T " << r.test_mae[1] << " (mean predictor " << r.baseline_mae[1] << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pdl: pore-scale dispersion lab"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_file, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("--set", g.settings, "override one config key (key=value), repeatable");
  app.add_option("--workers", g.workers, "worker threads (overrides PDL_WORKERS)");
  // bad settings fail every subcommand, not only those that read the config
  app.parse_complete_callback([&] { load_config(g); });

  // geom
  auto* geom = app.add_subcommand("geom", "geometry generation and checks");
  geom->require_subcommand(1);
  {
    auto* gen = geom->add_subcommand("generate", "random periodic geometry");
    static std::string kind = "perlin", out;
    static std::uint64_t seed = 0;
    static double porosity = 0.7;
    static int scale = 4, octaves = 3, res = 0;
    gen->add_option("--kind", kind, "perlin | fractal | voronoi");
    gen->add_option("--seed", seed);
    gen->add_option("--porosity", porosity);
    gen->add_option("--scale", scale, "noise lattice cells or voronoi seed count");
    gen->add_option("--octaves", octaves);
    gen->add_option("--resolution", res);
    gen->add_option("-o,--output", out)->required();
    gen->callback([&] {
      const auto c = load_config(g);
      const pdl::GeneratorSpec spec{pdl::generator_kind_from_string(kind), seed, porosity, scale, octaves};
      const auto r = pdl::generate_with_report(spec, res > 0 ? res : c.resolution);
      pdl::save_pbm(r.image, out);
      std::cout << "porosity " << r.image.void_fraction() << ", removed " << r.removed << "\n";
    });

    auto* shape = geom->add_subcommand("shape", "single centred obstacle");
    static std::string skind = "circle", sout;
    static double ratio = 0.3, aspect = 1.0, rotation = 0.0;
    static int sres = 0;
    shape->add_option("--kind", skind, "circle | square | ellipse | triangle");
    shape->add_option("--ratio", ratio, "size relative to the domain");
    shape->add_option("--aspect", aspect);
    shape->add_option("--rotation", rotation, "degrees");
    shape->add_option("--resolution", sres);
    shape->add_option("-o,--output", sout)->required();
    shape->callback([&] {
      const auto c = load_config(g);
      const pdl::ShapeSpec spec{pdl::shape_kind_from_string(skind), ratio, aspect, rotation};
      pdl::save_pbm(pdl::rasterize_shape(spec, sres > 0 ? sres : c.resolution), sout);
    });

    auto* check = geom->add_subcommand("check", "print pixels removed by the connectivity filter");
    static std::string cin;
    check->add_option("geometry", cin)->required()->check(CLI::ExistingFile);
    check->callback([&] { std::cout << pdl::filter_periodic_connectivity(pdl::load_pbm(cin)).removed << "\n"; });
  }

  // flow
  auto* flow = app.add_subcommand("flow", "pore-scale flow");
  flow->require_subcommand(1);
  {
    auto* solve = flow->add_subcommand("solve", "steady periodic flow");
    static std::string in, out, force;
    static double mu = 0.0;
    static bool ns = false;
    solve->add_option("geometry", in)->required()->check(CLI::ExistingFile);
    solve->add_option("--mu", mu, "dynamic viscosity");
    solve->add_option("--force", force, "body force fx[,fy]");
    solve->add_flag("--navier-stokes", ns, "Picard iteration with inertia");
    solve->add_option("-o,--output", out)->required();
    solve->callback([&] {
      auto c = load_config(g);
      if (mu > 0) c.fluid.viscosity = mu;
      if (!force.empty()) {
        const auto comma = force.find(',');
        c.fluid.body_force = pdl::Vec2(std::stod(force.substr(0, comma)), comma == std::string::npos ? 0.0 : std::stod(force.substr(comma + 1)));
      }
      if (ns) c.flow.navier_stokes = true;
      pdl::FlowReport rep;
      const auto f = pdl::solve_flow(pdl::load_pbm(in), c.fluid, c.flow, &rep);
      pdl::save_flow(f, out);
      std::cout << "solves " << rep.iterations << ", max divergence " << rep.max_divergence << "\n";
    });
  }

  // transport
  auto* transport = app.add_subcommand("transport", "scalar advection");
  transport->require_subcommand(1);
  {
    auto* run = transport->add_subcommand("run", "advect through the extended domain and sample the window");
    static std::string geo, fld, out;
    static double cfl = 0.0;
    static int samples = 0;
    run->add_option("geometry", geo)->required()->check(CLI::ExistingFile);
    run->add_option("flow", fld)->required()->check(CLI::ExistingFile);
    run->add_option("--cfl", cfl);
    run->add_option("--samples", samples);
    run->add_option("-o,--output", out)->required();
    run->callback([&] {
      auto c = load_config(g);
      if (cfl > 0) c.cfl = cfl;
      if (samples > 0) c.schedule.samples = samples;
      const pdl::ExtendedDomain domain(pdl::load_pbm(geo), pdl::load_flow(fld));
      const auto r = pdl::advect(domain, c.cfl, c.schedule);
      pdl::save_snapshots(r, domain, out);
      std::cout << "window steps " << r.window.start << ".." << r.window.end << ", dt " << r.dt << ", max balance residual "
                << r.max_balance_residual << "\n";
    });
  }

  // upscale
  auto* upscale = app.add_subcommand("upscale", "averaging and dispersivity fit");
  upscale->require_subcommand(1);
  {
    auto* fit = upscale->add_subcommand("fit", "fit alpha_L and alpha_T from snapshots");
    static std::string geo, fld, snaps, out;
    fit->add_option("--geometry", geo)->required()->check(CLI::ExistingFile);
    fit->add_option("--flow", fld)->required()->check(CLI::ExistingFile);
    fit->add_option("--snaps", snaps)->required()->check(CLI::ExistingDirectory);
    fit->add_option("-o,--output", out)->required();
    fit->callback([&] {
      const auto image = pdl::load_pbm(geo);
      const auto t = pdl::load_snapshots(snaps);
      const auto r = pdl::upscale_run(image, pdl::load_flow(fld), t.snapshots);
      json j;
      j["alpha_L"] = r.alphas.alpha_L;
      j["alpha_T"] = r.alphas.alpha_T;
      j["v_bar"] = vec(r.v_bar);
      j["window"] = {{"start_step", t.window.start}, {"end_step", t.window.end}, {"t_start", t.t_start}, {"t_end", t.t_end}};
      j["clamps"] = {{"longitudinal", r.clamps.longitudinal}, {"transversal", r.clamps.transversal}, {"degenerate", r.clamps.degenerate}};
      json samples = json::array();
      for (std::size_t i = 0; i < r.samples.size(); ++i) {
        const auto& s = r.samples[i];
        const auto& p = r.pairs[i];
        samples.push_back({{"time", s.time},
                           {"v_bar", vec(s.v_bar)},
                           {"neg_grad_c", vec(s.neg_grad_c)},
                           {"perturbation", vec(s.pert)},
                           {"alpha_L", p.alpha_L},
                           {"alpha_T", p.alpha_T},
                           {"clamped_L", p.clamped_L},
                           {"clamped_T", p.clamped_T},
                           {"degenerate_T", p.degenerate_T}});
      }
      j["samples"] = std::move(samples);
      write_text(out, j.dump(2) + "\n");
      std::cout << "alpha_L " << r.alphas.alpha_L << ", alpha_T " << r.alphas.alpha_T << "\n";
    });
  }

  // metrics
  auto* metrics = app.add_subcommand("metrics", "geometric metrics");
  metrics->require_subcommand(1);
  {
    auto* compute = metrics->add_subcommand("compute", "21 metrics of one geometry");
    static std::string in, out;
    compute->add_option("geometry", in)->required()->check(CLI::ExistingFile);
    compute->add_option("-o,--output", out);
    compute->callback([&] { write_text(out, metrics_json(pdl::assemble_metrics(pdl::load_pbm(in))).dump(2) + "\n"); });

    auto* corr = metrics->add_subcommand("correlate", "Pearson correlation of metrics with the dispersivities");
    static std::string dir, target = "alpha_L", cout_path;
    corr->add_option("dataset", dir)->required()->check(CLI::ExistingDirectory);
    corr->add_option("--target", target, "row ordering: alpha_L | alpha_T | none");
    corr->add_option("-o,--output", cout_path);
    corr->callback([&] {
      auto rows = pdl::correlation_table(pdl::load_dataset(dir));
      if (target != "none") {
        if (target != "alpha_L" && target != "alpha_T") throw pdl::Error(pdl::ErrorCode::InvalidArgument, "unknown target " + target);
        const bool l = target == "alpha_L";
        auto key = [l](const pdl::CorrelationRow& r) {
          const auto& v = l ? r.rho_L : r.rho_T;
          return v ? std::abs(*v) : -1.0;
        };
        std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) { return key(a) > key(b); });
      }
      write_text(cout_path, pdl::correlation_csv(rows));
    });
  }

  // nn
  auto* nn = app.add_subcommand("nn", "surrogate models");
  nn->require_subcommand(1);
  {
    static int epochs = 500, batch = 32, patience = 20;
    static std::uint64_t seed = 7;
    auto train_options = [] {
      pdl::nn::TrainOptions o;
      o.max_epochs = epochs;
      o.batch_size = batch;
      o.patience = patience;
      o.seed = seed;
      return o;
    };
    auto add_common = [](CLI::App* s) {
      s->add_option("--seed", seed);
      s->add_option("--epochs", epochs);
      s->add_option("--batch", batch);
      s->add_option("--patience", patience);
    };

    auto* tm = nn->add_subcommand("train-metrics", "MLP on the 21 metrics");
    static std::string dir, widths = "64,64,32", out;
    tm->add_option("dataset", dir)->required()->check(CLI::ExistingDirectory);
    tm->add_option("--widths", widths, "hidden widths, the last one is the head width");
    tm->add_option("-o,--output", out)->required();
    add_common(tm);
    tm->callback([&] {
      auto w = parse_ints(widths);
      if (w.size() < 2) throw pdl::Error(pdl::ErrorCode::InvalidArgument, "--widths needs at least one hidden width and a head width");
      const int head = w.back();
      w.pop_back();
      const auto rows = pdl::training_rows(pdl::load_dataset(dir));
      pdl::nn::Model model(pdl::nn::metrics_mlp_spec(w, head), seed);
      const auto r = pdl::nn::fit_regressor(model, pdl::metric_inputs(rows), pdl::alpha_targets(rows), train_options());
      report_training(r, model, out);
    });

    auto* tc = nn->add_subcommand("train-cnn", "periodic CNN on the geometry images");
    static std::string cdir, filters = "8,16", cout_path;
    static int dense = 128, head = 64;
    static bool augment = false;
    tc->add_option("dataset", cdir)->required()->check(CLI::ExistingDirectory);
    tc->add_option("--filters", filters);
    tc->add_option("--dense", dense);
    tc->add_option("--head", head);
    tc->add_flag("--augment", augment, "random x-axis flips and periodic shifts");
    tc->add_option("-o,--output", cout_path)->required();
    add_common(tc);
    tc->callback([&] {
      const auto rows = pdl::training_rows(pdl::load_dataset(cdir));
      std::vector<pdl::PoreImage> images;
      for (const auto& r : rows) images.push_back(pdl::load_pbm(std::filesystem::path(cdir) / r.geometry_path));
      if (images.empty()) throw pdl::Error(pdl::ErrorCode::InvalidArgument, "dataset has no usable records");
      pdl::nn::Model model(pdl::nn::cnn_spec(images.front().width(), parse_ints(filters), dense, head), seed);
      auto o = train_options();
      o.augment = augment;
      const auto r = pdl::nn::fit_regressor(model, pdl::image_inputs(images), pdl::alpha_targets(rows), o);
      report_training(r, model, cout_path);
    });

    auto* pr = nn->add_subcommand("predict", "predict alpha_L and alpha_T for a geometry or metrics file");
    static std::string model_path, input;
    pr->add_option("model", model_path)->required()->check(CLI::ExistingFile);
    pr->add_option("input", input)->required()->check(CLI::ExistingFile);
    pr->callback([&] {
      auto model = pdl::nn::load_checkpoint(model_path);
      pdl::nn::Tensor x;
      if (model.spec().input_shape.size() == 3) {
        x = pdl::image_inputs({pdl::load_pbm(input)});
      } else if (std::filesystem::path(input).extension() == ".json") {
        std::ifstream f(input);
        json j;
        f >> j;
        pdl::TrainingRow row;
        for (int k = 0; k < pdl::kMetricCount; ++k) row.metrics[k] = j.at(std::string(pdl::metric_names()[k])).get<double>();
        x = pdl::metric_inputs({row});
      } else {
        pdl::TrainingRow row;
        row.metrics = pdl::assemble_metrics(pdl::load_pbm(input)).values();
        x = pdl::metric_inputs({row});
      }
      const auto y = pdl::nn::predict(model, x);
      std::cout << "alpha_L " << pdl::format_double(y(0, 0)) << "\nalpha_T " << pdl::format_double(y(0, 1)) << "\n";
    });
  }

  // sweep
  {
    auto* sweep = app.add_subcommand("sweep", "verification sweep over one shape family");
    static std::string family = "circle", out, records;
    static std::vector<double> sizes, aspects{1.0}, rotations{0.0};
    sweep->add_option("--family", family, "circle | square | ellipse | triangle");
    sweep->add_option("--sizes", sizes)->delimiter(',')->required();
    sweep->add_option("--aspects", aspects)->delimiter(',');
    sweep->add_option("--rotations", rotations)->delimiter(',');
    sweep->add_option("--records", records, "directory for per-point JSON records");
    sweep->add_option("-o,--output", out);
    sweep->callback([&] {
      const auto c = load_config(g);
      const pdl::SweepSpec spec{pdl::shape_kind_from_string(family), sizes, aspects, rotations};
      const auto points = pdl::run_sweep(spec, c);
      if (!records.empty()) {
        std::filesystem::create_directories(records);
        for (const auto& p : points) pdl::save_record(p.record, std::filesystem::path(records) / (p.record.id + ".json"));
      }
      write_text(out, pdl::sweep_csv(points));
    });
  }

  // dataset
  auto* dataset = app.add_subcommand("dataset", "batch generation");
  dataset->require_subcommand(1);
  {
    auto* build = dataset->add_subcommand("build", "n cases per generator kind");
    static int n = 50;
    static std::string out;
    static bool quiet = false;
    build->add_option("-n,--per-kind", n);
    build->add_option("-o,--output", out)->required();
    build->add_flag("-q,--quiet", quiet);
    build->callback([&] {
      const auto c = load_config(g);
      const auto recs = pdl::build_dataset(n, c, out, [&](const pdl::DatasetRecord& r, int done, int total) {
        if (quiet) return;
        std::cerr << "[" << done << "/" << total << "] " << r.id;
        if (r.failure) std::cerr << " flagged: " << r.failure->code << " (" << r.failure->stage << ")";
        std::cerr << "\n";
      });
      const auto s = pdl::summarize(recs);
      std::cout << s.total << " records, " << s.successful << " successful, " << s.flagged << " flagged\n";
      for (const auto& [code, count] : s.by_error) std::cout << "  " << code << ": " << count << "\n";
    });

    auto* exp = dataset->add_subcommand("export", "write training.csv");
    static std::string dir;
    exp->add_option("dataset", dir)->required()->check(CLI::ExistingDirectory);
    exp->callback([&] { std::cout << pdl::export_training_table(dir).string() << "\n"; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const pdl::Error& e) {
    std::cerr << "error [" << pdl::to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
