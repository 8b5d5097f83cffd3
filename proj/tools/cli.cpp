#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "ste/image_ops.hpp"
#include "ste/io/checkpoint.hpp"
#include "ste/io/config.hpp"
#include "ste/io/dataset.hpp"
#include "ste/io/manifest.hpp"
#include "ste/metrics.hpp"
#include "ste/mser.hpp"
#include "ste/png_io.hpp"
#include "ste/trainer.hpp"

namespace ste::cli {

namespace fs = std::filesystem;

namespace {

struct Invalid : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void print_fingerprint(std::ostream& out, const std::string& resolved) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv(resolved)));
  out << "config fingerprint " << buf << "\n";
}

io::RunConfig resolve(const std::string& config_path, const std::vector<std::string>& sets) {
  io::RunConfig c = config_path.empty() ? io::RunConfig{} : io::load_config(config_path);
  return io::apply_overrides(c, sets);
}

Rect parse_bbox(const std::string& s) {
  Rect r;
  char tail;
  if (std::sscanf(s.c_str(), "%d,%d,%d,%d%c", &r.x0, &r.y0, &r.x1, &r.y1, &tail) != 4)
    throw Invalid("--bbox must be x0,y0,x1,y1");
  if (r.x0 >= r.x1 || r.y0 >= r.y1) throw Invalid("--bbox needs x0 < x1 and y0 < y1");
  return r;
}

// Output directory must be creatable; it is only created once work starts.
void check_out_dir(const std::string& d) {
  if (fs::exists(d) && !fs::is_directory(d)) throw Invalid("--out '" + d + "' exists and is not a directory");
}

void check_out_file(const std::string& f) {
  const fs::path parent = fs::path(f).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) throw Invalid("directory of '" + f + "' does not exist");
  if (fs::is_directory(f)) throw Invalid("'" + f + "' is a directory");
}

std::vector<train::TrainImage> native_images(const std::vector<io::ManifestRecord>& recs) {
  std::vector<train::TrainImage> out;
  for (const auto& r : recs) out.push_back(train::make_train_image(read_png(r.image, 3), r.texts, r.blanks));
  return out;
}

StyleSpace space_from(const io::Checkpoint& ck) {
  auto it = ck.meta.find("config");
  return io::make_space(it == ck.meta.end() ? io::RunConfig{} : io::parse_config(it->second));
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scene text erasing: synthesis, training, evaluation", "ste"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string manifest, out_path, config_path, policy_ckpt, resume, pairs, image, bbox, ckpt;
  std::vector<std::string> sets;
  int n = 0, samples = 50, delta = 5, min_area = 8;
  std::uint64_t seed = 0;
  bool uniform = false;

  auto* synth = app.add_subcommand("synth", "write synthetic (styled, original, mask, style) sets");
  synth->add_option("--manifest", manifest, "JSON-lines manifest")->required();
  synth->add_option("--out", out_path, "output directory")->required();
  synth->add_option("--n", n, "number of samples")->required()->check(CLI::Range(1, 10000000));
  synth->add_option("--seed", seed, "sampling seed")->required();
  auto* uni = synth->add_flag("--uniform", uniform, "uniform style sampling (default)");
  synth->add_option("--policy", policy_ckpt, "sample styles from a trained checkpoint")->excludes(uni);
  synth->add_option("--config", config_path, "config file (style-space overrides)");
  synth->add_option("--set", sets, "key=value config override (repeatable)");

  auto* trn = app.add_subcommand("train", "train the erasing model and the style policy");
  trn->add_option("--manifest", manifest, "JSON-lines manifest")->required();
  trn->add_option("--config", config_path, "config file")->required();
  trn->add_option("--out", out_path, "run directory")->required();
  trn->add_option("--resume", resume, "checkpoint to continue from");
  trn->add_option("--set", sets, "key=value config override (repeatable)");
  trn->footer("Config keys (\"key = value\" lines, # comments):\n" + io::schema_help());

  auto* ev = app.add_subcommand("eval", "PSNR/SSIM over {id}_pred.png/{id}_gt.png pairs");
  ev->add_option("--pairs", pairs, "pairs directory")->required();
  ev->add_option("--out", out_path, "report CSV")->required();

  auto* ms = app.add_subcommand("mser", "extract a text stroke mask inside a box");
  ms->add_option("--image", image, "input PNG")->required();
  ms->add_option("--bbox", bbox, "x0,y0,x1,y1")->required();
  ms->add_option("--out", out_path, "mask PNG (image-sized)")->required();
  ms->add_option("--delta", delta, "stability step in gray levels")->check(CLI::Range(1, 255));
  ms->add_option("--min-area", min_area, "smallest region in pixels")->check(CLI::Range(1, 1 << 30));

  auto* ps = app.add_subcommand("policy-stats", "per-element choice proportions of a trained policy");
  ps->add_option("--ckpt", ckpt, "training checkpoint")->required();
  ps->add_option("--manifest", manifest, "JSON-lines manifest")->required();
  ps->add_option("--out", out_path, "CSV")->required();
  ps->add_option("--samples", samples, "styles drawn per image")->check(CLI::Range(1, 1000000));
  ps->add_option("--seed", seed, "sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInvalid;
  }

  // Validation: nothing is written before all of this succeeds.
  std::function<void()> work;
  try {
    if (*synth) {
      const io::RunConfig cfg = resolve(config_path, sets);
      check_out_dir(out_path);
      auto recs = io::parse_manifest(manifest);
      if (recs.empty()) throw Invalid("manifest '" + manifest + "' has no records");
      std::optional<io::Checkpoint> pol;
      if (!policy_ckpt.empty()) {
        pol = io::load_checkpoint(policy_ckpt);
        if (!pol->has("P")) throw Invalid("checkpoint '" + policy_ckpt + "' has no policy");
      }
      const StyleSpace space = pol ? space_from(*pol) : io::make_space(cfg);
      std::string resolved = io::to_text(cfg) + "command = synth\nn = " + std::to_string(n) +
                             "\nsampling = " + (pol ? "policy" : "uniform") + "\nsynth_seed = " + std::to_string(seed) + "\n";
      if (pol) resolved += "policy_hash = " + std::to_string(pol->set("P").hash()) + "\n";
      print_fingerprint(out, resolved);
      work = [&, cfg, recs, pol, space, resolved]() mutable {
        const auto images = native_images(recs);
        const SynthOptions opts = io::make_synth_options(cfg);
        std::vector<StyleVector> styles(n);
        for (int i = 0; i < n; ++i) {
          Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
          const auto& im = images[i % images.size()];
          styles[i] = pol ? policy::sample_style(pol->set("P"), space, im.state, rng).style : sample_uniform(space, rng);
        }
        fs::create_directories(out_path);
        std::ofstream(fs::path(out_path) / "resolved-config", std::ios::binary) << resolved;
        std::vector<std::string> failed(n);
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < n; ++i) {
          const auto& im = images[i % images.size()];
          char id[16];
          std::snprintf(id, sizeof id, "%06d", i);
          try {
            io::write_sample(synthesize(im.image, im.texts, im.blanks, styles[i], opts), space, out_path, id);
          } catch (const PlacementError& e) {
            failed[i] = std::string(id) + ": " + e.what();
          }
        }
        int skipped = 0;
        for (const auto& f : failed)
          if (!f.empty()) {
            err << "skipped " << f << "\n";
            ++skipped;
          }
        out << "wrote " << n - skipped << " samples to " << out_path << "\n";
      };
    } else if (*trn) {
      const io::RunConfig cfg = resolve(config_path, sets);
      check_out_dir(out_path);
      auto recs = io::parse_manifest(manifest);
      if (recs.empty()) throw Invalid("manifest '" + manifest + "' has no records");
      std::optional<io::Checkpoint> ck;
      if (!resume.empty()) ck = io::load_checkpoint(resume);
      print_fingerprint(out, io::to_text(cfg));
      auto images = train::load_images(recs, cfg.image_size);
      // Construct (and so check the resume checkpoint against the config)
      // before any file is written.
      auto trainer = std::make_shared<train::Trainer>(cfg, images, train::TrainerOptions{});
      if (ck) trainer->restore(*ck);
      work = [&, cfg, images, ck]() {
        train::TrainerOptions opt;
        opt.out_dir = out_path;
        opt.log = &out;
        if (cfg.eval_samples > 0)
          opt.eval_set = train::make_eval_set(images, cfg.eval_samples, cfg.seed, io::make_space(cfg),
                                              io::make_synth_options(cfg));
        train::Trainer t(cfg, images, opt);
        if (ck) t.restore(*ck);
        t.run();
        if (!opt.eval_set.empty()) {
          const fs::path pd = fs::path(out_path) / "eval_pairs";
          fs::create_directories(pd);
          const auto pred = train::predict(t.generator(), opt.eval_set, cfg.orientation);
          for (std::size_t i = 0; i < pred.size(); ++i) {
            char id[16];
            std::snprintf(id, sizeof id, "%06zu", i);
            write_png((pd / (std::string(id) + "_pred.png")).string(), pred[i]);
            write_png((pd / (std::string(id) + "_gt.png")).string(), opt.eval_set[i].ground_truth);
          }
        }
        out << "trained to step " << t.steps_done() << "; checkpoint " << (fs::path(out_path) / "checkpoint.stew").string()
            << "\n";
      };
    } else if (*ev) {
      check_out_file(out_path);
      print_fingerprint(out, "command = eval\npairs = " + pairs + "\n");
      const EvalReport rep = evaluate(pairs);
      work = [&, rep]() {
        write_eval_csv(rep, out_path);
        char buf[96];
        std::snprintf(buf, sizeof buf, "pairs %zu  PSNR %.4f dB  SSIM %.4f  FID not computed\n", rep.rows.size(),
                      rep.mean_psnr, rep.mean_ssim);
        out << buf;
      };
    } else if (*ms) {
      check_out_file(out_path);
      const Rect box = parse_bbox(bbox);
      mser::Params p;
      p.delta = delta;
      p.min_area = min_area;
      p.validate();
      const RasterImage img = read_png(image, 3);
      if (!box.inside(img.width(), img.height())) throw Invalid("--bbox lies outside the image");
      print_fingerprint(out, "command = mser\nbbox = " + bbox + "\ndelta = " + std::to_string(delta) +
                                 "\nmin_area = " + std::to_string(min_area) + "\n");
      work = [&, img, box, p]() {
        const mser::Extraction ex = mser::extract_text_mask(img, box, p);
        BinaryMask full(img.height(), img.width());
        for (int y = 0; y < box.height(); ++y)
          for (int x = 0; x < box.width(); ++x) full.at(box.y0 + y, box.x0 + x) = ex.mask.at(y, x);
        write_mask_png(out_path, full);
        out << (ex.failed ? "no stable text regions found" : "extracted") << " (" << full.count() << " pixels)\n";
      };
    } else if (*ps) {
      check_out_file(out_path);
      const io::Checkpoint ck = io::load_checkpoint(ckpt);
      if (!ck.has("P")) throw Invalid("checkpoint '" + ckpt + "' has no policy");
      const StyleSpace space = space_from(ck);
      auto recs = io::parse_manifest(manifest);
      if (recs.empty()) throw Invalid("manifest '" + manifest + "' has no records");
      print_fingerprint(out, "command = policy-stats\nsamples = " + std::to_string(samples) + "\nseed = " +
                                 std::to_string(seed) + "\npolicy_hash = " + std::to_string(ck.set("P").hash()) + "\n");
      work = [&, ck, space, recs]() {
        std::vector<policy::PolicyState> states;
        for (const auto& im : native_images(recs)) states.push_back(im.state);
        nn::ParamSet<float> pol = ck.set("P");
        const auto st = train::choice_stats(pol, space, states, samples, seed);
        train::write_choice_stats(st, space, out_path);
        double best = 1;
        for (int e = 0; e < space.size(); ++e) best = std::min(best, st.uniform_p_value(e));
        out << "wrote " << out_path << "; smallest uniformity p-value " << best << "\n";
      };
    }
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  try {
    work();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace ste::cli
