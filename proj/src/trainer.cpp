#include "ste/trainer.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "ste/image_ops.hpp"
#include "ste/metrics.hpp"
#include "ste/model/adversary.hpp"
#include "ste/model/tensors.hpp"
#include "ste/png_io.hpp"

namespace ste::train {

namespace fs = std::filesystem;
using nn::Graph;
using nn::ParamSet;
using nn::Tensor;
using nn::Var;

namespace {

constexpr std::uint64_t kTagGen = 0x67656e, kTagDisc = 0x646973, kTagPol = 0x706f6c;
constexpr std::uint64_t kTagBatch = 0x6261746368, kTagPhase = 0x7068617365, kTagEval = 0x6576616c;
constexpr std::uint64_t kTagStats = 0x7374617473;
constexpr int kPlacementAttempts = 8;
constexpr int kForwardChunk = 16;

Rect scale_rect(const Rect& r, double sx, double sy, int w, int h, bool outward) {
  auto lo = [&](double v) { return static_cast<int>(outward ? std::floor(v) : std::ceil(v)); };
  auto hi = [&](double v) { return static_cast<int>(outward ? std::ceil(v) : std::floor(v)); };
  return {std::clamp(lo(r.x0 * sx), 0, w), std::clamp(lo(r.y0 * sy), 0, h), std::clamp(hi(r.x1 * sx), 0, w),
          std::clamp(hi(r.y1 * sy), 0, h)};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string hexfloat(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

// Synthesises samples[i] from (image[i], style[i]). A placement failure
// retries on other images, then with automatic blank selection.
void synthesize_all(const std::vector<TrainImage>& images, std::vector<int>& image,
                    const std::vector<StyleVector>& styles, const std::vector<std::uint64_t>& retry_seed,
                    const SynthOptions& opts, Exec exec, std::vector<SynthSample>& out) {
  const int n = static_cast<int>(styles.size());
  out.assign(n, {});
  std::vector<std::exception_ptr> err(n);
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
  for (int i = 0; i < n; ++i) {
    try {
      Rng rng(retry_seed[i]);
      for (int attempt = 0;; ++attempt) {
        const TrainImage& im = images[image[i]];
        try {
          out[i] = attempt <= kPlacementAttempts ? synthesize(im.image, im.texts, im.blanks, styles[i], opts)
                                                 : synthesize(im.image, im.texts, {}, styles[i], opts);
          break;
        } catch (const PlacementError&) {
          if (attempt > kPlacementAttempts) throw;
          if (attempt < kPlacementAttempts) image[i] = rng.below(static_cast<int>(images.size()));
        }
      }
    } catch (...) {
      err[i] = std::current_exception();
    }
  }
  for (const auto& e : err)
    if (e) std::rethrow_exception(e);
}

struct Tensors {
  Tensor<float> x, m, m3, gt;
};

Tensors to_tensors(const std::vector<SynthSample>& s, std::size_t begin, std::size_t end) {
  std::vector<const RasterImage*> xs, gts;
  std::vector<const BinaryMask*> ms;
  for (std::size_t i = begin; i < end; ++i) {
    xs.push_back(&s[i].i_syn);
    gts.push_back(&s[i].ground_truth);
    ms.push_back(&s[i].m_syn);
  }
  return {model::images_to_tensor<float>(xs), model::masks_to_tensor<float>(ms, 1),
          model::masks_to_tensor<float>(ms, 3), model::images_to_tensor<float>(gts)};
}

// Mean |I_pred - I_gt| per image of an NCHW batch.
std::vector<double> per_image_l1(const Tensor<float>& x, const Tensor<float>& ir, const Tensor<float>& m3,
                                 const Tensor<float>& gt, model::CompositeOrientation o) {
  const int n = x.shape[0];
  const std::size_t per = x.size() / n;
  std::vector<double> out(n);
  for (int b = 0; b < n; ++b) {
    double s = 0;
    for (std::size_t k = b * per; k < (b + 1) * per; ++k) {
      const bool take_r = (m3.data[k] != 0) == (o == model::CompositeOrientation::complement);
      s += std::abs(static_cast<double>(take_r ? ir.data[k] : x.data[k]) - gt.data[k]);
    }
    out[b] = s / static_cast<double>(per);
  }
  return out;
}

struct ForwardOut {
  std::vector<double> l1, gap;
  std::vector<RasterImage> pred;
  std::vector<double> r_real;
};

// Read-only forward over samples in chunks; D_text scores when disc is given.
ForwardOut forward_samples(ParamSet<float>& gen, ParamSet<float>* disc, const std::vector<SynthSample>& s,
                           model::CompositeOrientation o, Exec exec, bool want_pred) {
  ForwardOut out;
  for (std::size_t b = 0; b < s.size(); b += kForwardChunk) {
    const std::size_t e = std::min(s.size(), b + kForwardChunk);
    const Tensors t = to_tensors(s, b, e);
    Graph<float> g(exec);
    const Var x = g.input(t.x), m = g.input(t.m);
    const model::EraseVars v = model::generator_forward(g, gen, x, m);
    const auto& ir = g.value(v.i_r);
    const auto& ic = g.value(v.i_c);
    for (double l : per_image_l1(t.x, ir, t.m3, t.gt, o)) out.l1.push_back(l);
    const std::size_t per = ir.size() / (e - b);
    for (std::size_t i = 0; i < e - b; ++i) {
      double gap = 0;
      for (std::size_t k = i * per; k < (i + 1) * per; ++k) gap += std::abs(static_cast<double>(ir.data[k]) - ic.data[k]);
      out.gap.push_back(gap / static_cast<double>(per));
      if (want_pred)
        out.pred.push_back(model::composite(s[b + i].i_syn, model::tensor_to_image(ir, static_cast<int>(i)),
                                            s[b + i].m_syn, o));
    }
    if (disc) {
      const Var tm = model::d_text(g, *disc, v.g_feat);
      for (double r : model::r_real_batch(g.value(tm), t.m)) out.r_real.push_back(r);
    }
  }
  return out;
}

void truncate_csv(const fs::path& p, int max_step) {
  if (!fs::exists(p)) return;
  std::ifstream in(p);
  std::string line, kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (header || std::stoi(line.substr(0, line.find(','))) <= max_step) kept += line + "\n";
    header = false;
  }
  in.close();
  std::ofstream(p, std::ios::binary | std::ios::trunc) << kept;
}

std::string config_without_length(io::RunConfig c) {
  c.total_steps = 0;
  return io::to_text(c);
}

}  // namespace

TrainImage make_train_image(RasterImage image, std::vector<TextAnnotation> texts, std::vector<Rect> blanks) {
  TrainImage t;
  t.text_box = BinaryMask(image.height(), image.width());
  for (const auto& a : texts)
    for (int y = a.bbox.y0; y < a.bbox.y1; ++y)
      for (int x = a.bbox.x0; x < a.bbox.x1; ++x) t.text_box.at(y, x) = 1;
  t.state = policy::encode_state(image, texts);
  t.image = std::move(image);
  t.texts = std::move(texts);
  t.blanks = std::move(blanks);
  return t;
}

std::vector<TrainImage> load_images(const std::vector<io::ManifestRecord>& records, int size) {
  std::vector<TrainImage> out;
  for (const auto& r : records) {
    RasterImage img = read_png(r.image, 3);
    const double sx = static_cast<double>(size) / img.width(), sy = static_cast<double>(size) / img.height();
    std::vector<TextAnnotation> texts;
    std::vector<Rect> blanks;
    for (const auto& t : r.texts) {
      const Rect b = scale_rect(t.bbox, sx, sy, size, size, true);
      if (!b.empty()) texts.push_back({b, t.content});
    }
    for (const auto& b : r.blanks) {
      const Rect s = scale_rect(b, sx, sy, size, size, false);
      if (!s.empty()) blanks.push_back(s);
    }
    if (img.height() != size || img.width() != size) img = resize_bilinear(img, size, size);
    out.push_back(make_train_image(std::move(img), std::move(texts), std::move(blanks)));
  }
  return out;
}

std::vector<SynthSample> make_eval_set(const std::vector<TrainImage>& images, int n, std::uint64_t seed,
                                       const StyleSpace& space, const SynthOptions& opts) {
  if (images.empty()) throw InvalidArgument("make_eval_set: no images");
  Rng rng(derive_seed(seed, {kTagEval}));
  std::vector<int> image(n);
  std::vector<StyleVector> styles(n);
  std::vector<std::uint64_t> retry(n);
  for (int i = 0; i < n; ++i) {
    image[i] = i % static_cast<int>(images.size());
    styles[i] = sample_uniform(space, rng);
    retry[i] = rng.next_u64();
  }
  std::vector<SynthSample> out;
  synthesize_all(images, image, styles, retry, opts, Exec::parallel, out);
  return out;
}

std::vector<RasterImage> predict(ParamSet<float>& gen, const std::vector<SynthSample>& samples,
                                 model::CompositeOrientation o, Exec exec) {
  return forward_samples(gen, nullptr, samples, o, exec, true).pred;
}

ModelMetrics evaluate_model(ParamSet<float>& gen, const std::vector<SynthSample>& samples,
                            model::CompositeOrientation o, Exec exec) {
  if (samples.empty()) throw InvalidArgument("evaluate_model: empty sample set");
  const ForwardOut f = forward_samples(gen, nullptr, samples, o, exec, true);
  ModelMetrics m;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    m.l1 += f.l1[i];
    m.refine_gap += f.gap[i];
    m.psnr += psnr(f.pred[i], samples[i].ground_truth);
    m.ssim += ssim(f.pred[i], samples[i].ground_truth);
  }
  const double n = static_cast<double>(samples.size());
  m.l1 /= n;
  m.refine_gap /= n;
  m.psnr /= n;
  m.ssim /= n;
  return m;
}

Trainer::Trainer(io::RunConfig cfg, std::vector<TrainImage> images, TrainerOptions opt)
    : cfg_(std::move(cfg)), images_(std::move(images)), opt_(std::move(opt)) {
  if (images_.empty()) throw InvalidArgument("trainer: no training images");
  for (const auto& im : images_)
    if (im.image.height() != cfg_.image_size || im.image.width() != cfg_.image_size)
      throw InvalidArgument("trainer: images must be image_size x image_size");
  cfg_.loss.validate();
  space_ = io::make_space(cfg_);
  synth_ = io::make_synth_options(cfg_);
  model::init_generator(gen_, derive_seed(cfg_.seed, {kTagGen}));
  model::init_discriminator(disc_, derive_seed(cfg_.seed, {kTagDisc}));
  policy::init_policy(pol_, space_, derive_seed(cfg_.seed, {kTagPol}));
  diff_.momentum = cfg_.reward_momentum;
  diff_.alpha = cfg_.reward_alpha;
  diff_.validate();
  if (!opt_.out_dir.empty()) {
    fs::create_directories(opt_.out_dir);
    std::ofstream(fs::path(opt_.out_dir) / "resolved-config", std::ios::binary) << io::to_text(cfg_);
  }
}

bool Trainer::phase_due(int step) const {
  return cfg_.policy_enabled && step >= cfg_.policy_warmup && step % cfg_.policy_cadence == 0;
}

Trainer::Batch Trainer::make_batch(int step) {
  Rng rng(derive_seed(cfg_.seed, {kTagBatch, static_cast<std::uint64_t>(step)}));
  const int n = cfg_.batch_size;
  Batch b;
  b.image.resize(n);
  for (int& i : b.image) i = rng.below(static_cast<int>(images_.size()));
  std::vector<StyleVector> styles;
  b.policy_sampled = cfg_.policy_enabled && step > cfg_.policy_warmup;
  if (b.policy_sampled) {
    std::vector<policy::PolicyState> states;
    for (int i : b.image) states.push_back(images_[i].state);
    for (auto& s : policy::sample_styles(pol_, space_, states, rng)) styles.push_back(std::move(s.style));
  } else {
    for (int k = 0; k < n; ++k) styles.push_back(sample_uniform(space_, rng));
  }
  std::vector<std::uint64_t> retry(n);
  for (auto& r : retry) r = rng.next_u64();
  synthesize_all(images_, b.image, styles, retry, synth_, opt_.exec, b.samples);
  return b;
}

StepRecord Trainer::train_step(const Batch& batch) {
  const auto& s = batch.samples;
  const Tensors t = to_tensors(s, 0, s.size());
  std::vector<BinaryMask> orig;
  for (std::size_t i = 0; i < s.size(); ++i) {
    BinaryMask m = images_[batch.image[i]].text_box;
    for (std::size_t k = 0; k < m.data().size(); ++k)
      if (s[i].m_syn.data()[k]) m.data()[k] = 0;
    orig.push_back(std::move(m));
  }
  std::vector<const BinaryMask*> orig_ptr;
  for (const auto& m : orig) orig_ptr.push_back(&m);

  Graph<float> g(opt_.exec);
  const Var x = g.input(t.x), m = g.input(t.m), m3 = g.input(t.m3), gt = g.input(t.gt);
  const Var om = g.input(model::masks_to_tensor<float>(orig_ptr, 1));
  const model::EraseVars ev = model::generator_forward(g, gen_, x, m);
  const Var pred = model::composite(g, x, ev.i_r, m3, cfg_.orientation);

  StepRecord rec;
  rec.policy_sampled = batch.policy_sampled;

  // Discriminator and D_text on detached generator outputs.
  const model::LsganVars dl =
      model::lsgan_losses(g, model::d_patch(g, disc_, gt), model::d_patch(g, disc_, g.detach(pred)));
  const Var dt = model::d_text_loss(g, model::d_text(g, disc_, g.detach(ev.g_feat)), om);
  const Var d_total = g.add(dl.d_loss, dt);
  rec.d_loss = g.scalar(dl.d_loss);
  rec.d_text = g.scalar(dt);
  disc_.zero_grad();
  g.backward(d_total);
  nn::adam_step(disc_, cfg_.lr_discriminator);

  // Generator against the updated discriminator.
  g.clear_grads();
  const Var adv = model::lsgan_losses(g, Var{}, model::d_patch(g, disc_, pred)).g_loss;
  const model::LossVars lv = model::total_loss(g, ev, {x, m, m3, gt, adv}, cfg_.loss, cfg_.orientation);
  gen_.zero_grad();
  g.backward(lv.total);
  nn::adam_step(gen_, cfg_.lr_generator);
  disc_.zero_grad();

  rec.g_total = g.scalar(lv.total);
  rec.g_adv = g.scalar(lv.adv);
  rec.rec = g.scalar(lv.rec);
  rec.mask = g.scalar(lv.mask);
  rec.tel = g.scalar(lv.tel);
  const auto l1 = per_image_l1(t.x, g.value(ev.i_r), t.m3, t.gt, cfg_.orientation);
  for (double v : l1) rec.l1 += v;
  rec.l1 /= static_cast<double>(l1.size());
  return rec;
}

StepRecord Trainer::step() {
  const int t = step_ + 1;
  const Batch b = make_batch(t);
  StepRecord rec = train_step(b);
  rec.step = t;
  step_ = t;
  diff_ = policy::update_l_mean(diff_, rec.l1);
  rec.l_mean = diff_.l_mean;
  append_csv("loss.csv", "step,d_loss,d_text,g_total,g_adv,rec,mask,tel,l1,l_mean,policy_sampled",
             std::to_string(t) + "," + fmt(rec.d_loss) + "," + fmt(rec.d_text) + "," + fmt(rec.g_total) + "," +
                 fmt(rec.g_adv) + "," + fmt(rec.rec) + "," + fmt(rec.mask) + "," + fmt(rec.tel) + "," +
                 fmt(rec.l1) + "," + fmt(rec.l_mean) + "," + (rec.policy_sampled ? "1" : "0"));
  if (phase_due(t)) policy_phase();
  return rec;
}

PhaseRecord Trainer::policy_phase() {
  PhaseRecord pr;
  pr.step = step_;
  const std::uint64_t hg = gen_.hash(), hd = disc_.hash();
  try {
    Rng rng(derive_seed(cfg_.seed, {kTagPhase, static_cast<std::uint64_t>(step_),
                                    static_cast<std::uint64_t>(phase_count_)}));
    const int n = static_cast<int>(images_.size());
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    const int mcount = cfg_.reward_batch;
    std::vector<int> image(mcount);
    std::vector<policy::PolicyState> states;
    for (int k = 0; k < mcount; ++k) {
      image[k] = perm[k % n];
      states.push_back(images_[image[k]].state);
    }
    const auto ps = policy::sample_styles(pol_, space_, states, rng);

    policy::ReinforceBatch rb;
    std::vector<double> rr, rd;
    if (opt_.reward_override) {
      for (const auto& p : ps) rr.push_back(opt_.reward_override(p.style));
      rd.assign(rr.size(), 0.0);
      rb.reward = policy::combine_rewards(rr, rd, 1.0, 0.0);
    } else {
      std::vector<StyleVector> styles;
      for (const auto& p : ps) styles.push_back(p.style);
      std::vector<std::uint64_t> retry(mcount);
      for (auto& r : retry) r = rng.next_u64();
      std::vector<SynthSample> samples;
      synthesize_all(images_, image, styles, retry, synth_, opt_.exec, samples);
      const ForwardOut f = forward_samples(gen_, &disc_, samples, cfg_.orientation, opt_.exec, false);
      rr = f.r_real;
      for (double l : f.l1) rd.push_back(policy::r_diff(l, diff_));
      for (double l : f.l1) pr.mean_loss += l / mcount;
      rb.reward = policy::combine_rewards(rr, rd, cfg_.reward_a1, cfg_.reward_a2);
    }
    for (int k = 0; k < mcount; ++k) {
      pr.mean_r_real += rr[k] / mcount;
      pr.mean_r_diff += rd[k] / mcount;
    }
    rb.states = states;
    for (const auto& p : ps) {
      rb.styles.push_back(p.style);
      rb.active.push_back(p.active);
    }
    policy::reinforce_update(pol_, space_, rb, cfg_.lr_policy);
    pr.samples = mcount;
  } catch (const ContractError&) {
    throw;
  } catch (const std::exception& e) {
    pr.skipped = true;
    pr.reason = e.what();
    if (opt_.log) *opt_.log << "policy phase at step " << step_ << " skipped: " << e.what() << "\n";
  }
  if (gen_.hash() != hg || disc_.hash() != hd)
    throw ContractError("policy phase modified erasing-model parameters");
  ++phase_count_;
  phases_.push_back(pr);
  append_csv("policy.csv", "step,skipped,samples,mean_r_real,mean_r_diff,mean_loss,reason",
             std::to_string(pr.step) + "," + (pr.skipped ? "1" : "0") + "," + std::to_string(pr.samples) + "," +
                 fmt(pr.mean_r_real) + "," + fmt(pr.mean_r_diff) + "," + fmt(pr.mean_loss) + ",\"" + pr.reason +
                 "\"");
  return pr;
}

void Trainer::write_eval() {
  if (opt_.eval_set.empty()) return;
  const ModelMetrics m = evaluate_model(gen_, opt_.eval_set, cfg_.orientation, opt_.exec);
  append_csv("eval.csv", "step,l1,psnr,ssim,refine_gap,fid",
             std::to_string(step_) + "," + fmt(m.l1) + "," + fmt(m.psnr) + "," + fmt(m.ssim) + "," +
                 fmt(m.refine_gap) + ",not computed");
  if (opt_.log)
    *opt_.log << "step " << step_ << " eval l1 " << fmt(m.l1) << " psnr " << fmt(m.psnr) << " ssim " << fmt(m.ssim)
              << "\n";
}

void Trainer::run() {
  if (step_ == 0 && !opt_.out_dir.empty())
    for (const char* f : {"loss.csv", "policy.csv", "eval.csv"}) fs::remove(fs::path(opt_.out_dir) / f);
  while (step_ < cfg_.total_steps) {
    const StepRecord r = step();
    if (opt_.log && (r.step % 50 == 0 || r.step == 1))
      *opt_.log << "step " << r.step << " g " << fmt(r.g_total) << " d " << fmt(r.d_loss) << " l1 " << fmt(r.l1)
                << "\n";
    if (step_ % cfg_.eval_every == 0 || step_ == cfg_.total_steps) {
      write_eval();
      if (!opt_.out_dir.empty()) save((fs::path(opt_.out_dir) / "checkpoint.stew").string());
    }
  }
}

io::Checkpoint Trainer::checkpoint() const {
  io::Checkpoint ck;
  ck.meta["step"] = std::to_string(step_);
  ck.meta["l_mean"] = hexfloat(diff_.l_mean);
  ck.meta["config"] = io::to_text(cfg_);
  ck.sets.emplace_back("G", gen_);
  ck.sets.emplace_back("D", disc_);
  ck.sets.emplace_back("P", pol_);
  return ck;
}

void Trainer::restore(const io::Checkpoint& ck) {
  for (const char* k : {"step", "l_mean", "config"})
    if (!ck.meta.count(k)) throw FormatError(std::string("checkpoint lacks '") + k + "'");
  if (config_without_length(io::parse_config(ck.meta.at("config"))) != config_without_length(cfg_))
    throw InvalidArgument("checkpoint was written with a different configuration");
  const ParamSet<float>& g = ck.set("G");
  const ParamSet<float>& d = ck.set("D");
  const ParamSet<float>& p = ck.set("P");
  auto same_layout = [](const ParamSet<float>& a, const ParamSet<float>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a.at(i).name != b.at(i).name || a.at(i).value.shape != b.at(i).value.shape) return false;
    return true;
  };
  if (!same_layout(g, gen_) || !same_layout(d, disc_) || !same_layout(p, pol_))
    throw FormatError("checkpoint parameter layout does not match the model");
  gen_ = g;
  disc_ = d;
  pol_ = p;
  step_ = std::stoi(ck.meta.at("step"));
  diff_.l_mean = std::strtod(ck.meta.at("l_mean").c_str(), nullptr);
  phases_.clear();
  phase_count_ = 0;
  for (int t = 1; t <= step_; ++t) phase_count_ += phase_due(t);
  if (!opt_.out_dir.empty())
    for (const char* f : {"loss.csv", "policy.csv", "eval.csv"}) truncate_csv(fs::path(opt_.out_dir) / f, step_);
}

void Trainer::save(const std::string& path) const { io::save_checkpoint(checkpoint(), path); }

void Trainer::append_csv(const std::string& file, const std::string& header, const std::string& row) const {
  if (opt_.out_dir.empty()) return;
  const fs::path p = fs::path(opt_.out_dir) / file;
  const bool fresh = !fs::exists(p);
  std::ofstream out(p, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  if (fresh) out << header << "\n";
  out << row << "\n";
}

std::vector<std::vector<double>> ChoiceStats::proportions() const {
  std::vector<std::vector<double>> out(counts.size());
  for (std::size_t n = 0; n < counts.size(); ++n) {
    out[n].assign(counts[n].size(), 0.0);
    if (active[n] == 0) continue;
    for (std::size_t c = 0; c < counts[n].size(); ++c)
      out[n][c] = static_cast<double>(counts[n][c]) / static_cast<double>(active[n]);
  }
  return out;
}

double ChoiceStats::uniform_p_value(int n) const {
  const auto& c = counts.at(n);
  if (active[n] == 0 || c.size() < 2) return 1.0;
  const double expect = static_cast<double>(active[n]) / static_cast<double>(c.size());
  double chi2 = 0;
  for (long k : c) chi2 += (k - expect) * (k - expect) / expect;
  const boost::math::chi_squared dist(static_cast<double>(c.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, chi2));
}

ChoiceStats choice_stats(ParamSet<float>& pol, const StyleSpace& space, const std::vector<policy::PolicyState>& states,
                         int samples_per_state, std::uint64_t seed) {
  if (states.empty() || samples_per_state < 1) throw InvalidArgument("choice_stats: nothing to sample");
  ChoiceStats st;
  for (const auto& e : space.elements) st.counts.emplace_back(e.choices, 0);
  st.active.assign(space.size(), 0);
  Rng rng(derive_seed(seed, {kTagStats}));
  std::vector<policy::PolicyState> batch;
  for (const auto& s : states)
    for (int k = 0; k < samples_per_state; ++k) batch.push_back(s);
  for (const auto& smp : policy::sample_styles(pol, space, batch, rng))
    for (int n = 0; n < space.size(); ++n)
      if (smp.active[n]) {
        ++st.counts[n][smp.style[n]];
        ++st.active[n];
      }
  return st;
}

void write_choice_stats(const ChoiceStats& s, const StyleSpace& space, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  const int width = 12;
  out << "element,active";
  for (int c = 0; c < width; ++c) out << ",choice" << c;
  out << ",uniform_p\n";
  const auto prop = s.proportions();
  for (int n = 0; n < space.size(); ++n) {
    out << space.elements[n].name << "," << s.active[n];
    for (int c = 0; c < width; ++c) {
      out << ",";
      if (c < static_cast<int>(prop[n].size()) && s.active[n] > 0) out << fmt(prop[n][c]);
    }
    out << "," << fmt(s.uniform_p_value(n)) << "\n";
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace ste::train
