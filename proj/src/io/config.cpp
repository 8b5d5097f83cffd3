#include "ste/io/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

namespace ste::io {

namespace {

struct Key {
  std::string name;
  std::string range;
  std::string doc;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& v, long long lo, long long hi) {
  long long x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw InvalidArgument("'" + v + "' is not an integer");
  if (x < lo || x > hi) throw InvalidArgument(v + " is outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return x;
}

double parse_real(const std::string& v, double lo, double hi) {
  double x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x))
    throw InvalidArgument("'" + v + "' is not a finite number");
  if (x < lo || x > hi) {
    std::ostringstream os;
    os << v << " is outside [" << lo << ", " << hi << "]";
    throw InvalidArgument(os.str());
  }
  return x;
}

std::string fmt_real(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

Key int_key(std::string name, int RunConfig::*f, long long lo, long long hi, std::string doc) {
  return {name, "[" + std::to_string(lo) + ", " + std::to_string(hi) + "]", std::move(doc),
          [f, lo, hi](RunConfig& c, const std::string& v) { c.*f = static_cast<int>(parse_int(v, lo, hi)); },
          [f](const RunConfig& c) { return std::to_string(c.*f); }};
}

template <class Obj>
Key real_key(std::string name, std::function<double&(Obj&)> ref, double lo, double hi, std::string doc) {
  std::ostringstream r;
  r << "[" << lo << ", " << hi << "]";
  return {name, r.str(), std::move(doc),
          [ref, lo, hi](RunConfig& c, const std::string& v) { ref(c) = parse_real(v, lo, hi); },
          [ref](const RunConfig& c) { return fmt_real(ref(const_cast<RunConfig&>(c))); }};
}

Key real_field(std::string name, double RunConfig::*f, double lo, double hi, std::string doc) {
  return real_key<RunConfig>(std::move(name), [f](RunConfig& c) -> double& { return c.*f; }, lo, hi, std::move(doc));
}

Key loss_field(std::string name, double model::LossWeights::*f, double lo, double hi, std::string doc) {
  return real_key<RunConfig>(std::move(name), [f](RunConfig& c) -> double& { return c.loss.*f; }, lo, hi,
                             std::move(doc));
}

const std::vector<Key>& schema() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    k.push_back({"seed", "[0, 2^64)", "master seed for data, init and sampling",
                 [](RunConfig& c, const std::string& v) {
                   std::uint64_t x = 0;
                   const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
                   if (ec != std::errc() || p != v.data() + v.size())
                     throw InvalidArgument("'" + v + "' is not an unsigned integer");
                   c.seed = x;
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    k.push_back(int_key("image_size", &RunConfig::image_size, 16, 512, "training crops are image_size^2, multiple of 8"));
    k.push_back(int_key("batch_size", &RunConfig::batch_size, 1, 256, "images per erasing-model step"));
    k.push_back(int_key("total_steps", &RunConfig::total_steps, 0, 10000000, "erasing-model steps"));
    k.push_back(int_key("eval_every", &RunConfig::eval_every, 1, 10000000, "checkpoint/eval interval in steps"));
    k.push_back(int_key("eval_samples", &RunConfig::eval_samples, 0, 100000, "fixed held-out synthetic pairs scored at each checkpoint"));
    k.push_back(int_key("policy_cadence", &RunConfig::policy_cadence, 1, 10000000, "steps between policy phases"));
    k.push_back(int_key("reward_batch", &RunConfig::reward_batch, 2, 100000, "images scored per policy phase"));
    k.push_back(int_key("policy_warmup", &RunConfig::policy_warmup, 0, 10000000, "steps of uniform sampling before policy control"));
    k.push_back({"policy_enabled", "true|false", "false trains on uniform samples only",
                 [](RunConfig& c, const std::string& v) {
                   if (v != "true" && v != "false") throw InvalidArgument("'" + v + "' is not true/false");
                   c.policy_enabled = v == "true";
                 },
                 [](const RunConfig& c) { return std::string(c.policy_enabled ? "true" : "false"); }});
    k.push_back(real_field("lr.generator", &RunConfig::lr_generator, 0, 1, "Adam step size, generator"));
    k.push_back(real_field("lr.discriminator", &RunConfig::lr_discriminator, 0, 1, "Adam step size, D and D_text"));
    k.push_back(real_field("lr.policy", &RunConfig::lr_policy, 0, 1, "Adam step size, policy"));
    k.push_back(loss_field("loss.adv", &model::LossWeights::adv, 0, 1e3, "lambda1, adversarial"));
    k.push_back(loss_field("loss.rec", &model::LossWeights::rec, 0, 1e3, "lambda2, reconstruction"));
    k.push_back(loss_field("loss.perc", &model::LossWeights::perc, 0, 0, "lambda3, unsupported (0)"));
    k.push_back(loss_field("loss.sty", &model::LossWeights::sty, 0, 0, "lambda4, unsupported (0)"));
    k.push_back(loss_field("loss.mask", &model::LossWeights::mask, 0, 1e3, "lambda5, mask dice"));
    k.push_back(loss_field("loss.tel", &model::LossWeights::tel, 0, 1e3, "lambda6, triplet erasure"));
    k.push_back(loss_field("loss.gamma", &model::LossWeights::gamma, 1, 10, "TEL exponent"));
    k.push_back(loss_field("loss.coarse", &model::LossWeights::coarse, 0, 1e3, "coarse-stage weight inside L_rec"));
    k.push_back(real_field("reward.alpha", &RunConfig::reward_alpha, 1.000001, 100, "difficulty target multiple of l_mean"));
    k.push_back(real_field("reward.a1", &RunConfig::reward_a1, 0, 1e3, "weight of normalised R_real"));
    k.push_back(real_field("reward.a2", &RunConfig::reward_a2, 0, 1e3, "weight of normalised R_diff"));
    k.push_back(real_field("reward.momentum", &RunConfig::reward_momentum, 1e-6, 0.999999, "EMA momentum of l_mean"));
    k.push_back({"composite_orientation", "as-printed|complement", "which image fills the synthetic mask region",
                 [](RunConfig& c, const std::string& v) { c.orientation = model::parse_orientation(v); },
                 [](const RunConfig& c) { return model::to_string(c.orientation); }});
    return k;
  }();
  return keys;
}

void set_key(RunConfig& c, const std::string& key, const std::string& value) {
  static const std::string pre = "style.", post = ".choices";
  if (key.rfind(pre, 0) == 0 && key.size() > pre.size() + post.size() &&
      key.compare(key.size() - post.size(), post.size(), post) == 0) {
    const std::string elem = key.substr(pre.size(), key.size() - pre.size() - post.size());
    const StyleSpace sp = default_space();
    const int e = sp.index_of(elem);  // throws for unknown names
    c.style_choices[elem] = static_cast<int>(parse_int(value, 2, sp.elements[e].choices));
    return;
  }
  for (const auto& k : schema())
    if (k.name == key) {
      try {
        k.set(c, value);
      } catch (const InvalidArgument& e) {
        throw InvalidArgument(key + ": " + e.what());
      }
      return;
    }
  throw InvalidArgument("unknown config key '" + key + "'");
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string raw;
  std::set<std::string> seen;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw.substr(0, raw.find('#')));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("line " + std::to_string(line) + ": expected key = value", line);
    const std::string key = trim(s.substr(0, eq)), value = trim(s.substr(eq + 1));
    if (!seen.insert(key).second) throw ParseError("line " + std::to_string(line) + ": duplicate key '" + key + "'", line);
    try {
      set_key(c, key, value);
    } catch (const InvalidArgument& e) {
      throw ParseError("line " + std::to_string(line) + ": " + e.what(), line);
    }
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

RunConfig apply_overrides(RunConfig cfg, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw InvalidArgument("override '" + s + "' must be key=value");
    set_key(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  if (cfg.image_size % 8) throw InvalidArgument("image_size must be a multiple of 8");
  return cfg;
}

std::string to_text(const RunConfig& cfg) {
  std::map<std::string, std::string> kv;
  for (const auto& k : schema()) kv[k.name] = k.get(cfg);
  for (const auto& [e, n] : cfg.style_choices) kv["style." + e + ".choices"] = std::to_string(n);
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t fingerprint(const RunConfig& cfg) {
  const std::string t = to_text(cfg);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : t) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string schema_help() {
  std::ostringstream os;
  const RunConfig d;
  for (const auto& k : schema()) {
    std::string def = k.get(d);
    if (def.find('.') != std::string::npos) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", std::stod(def));
      def = buf;
    }
    os << std::left << std::setw(24) << k.name << " default " << std::setw(12) << def << " " << std::setw(24)
       << k.range << " " << k.doc << "\n";
  }
  os << std::setw(24) << "style.<element>.choices" << " default all          [2, element choices]     keep the first k choices\n";
  return os.str();
}

StyleSpace make_space(const RunConfig& cfg) {
  StyleSpace sp = default_space();
  for (const auto& [name, k] : cfg.style_choices) {
    const int e = sp.index_of(name);
    sp.elements[e].choices = k;
    for (auto& child : sp.elements)
      if (child.parent == e)
        std::erase_if(child.parent_allows, [k](int c) { return c >= k; });
  }
  sp.validate();
  return sp;
}

SynthOptions make_synth_options(const RunConfig& cfg) {
  SynthOptions o;
  const StyleSpace sp = make_space(cfg);
  StyleValues& v = o.values;
  const std::pair<int, std::vector<double>*> tables[] = {
      {kSize, &v.size_px},   {kBlur, &v.blur_sigma},       {kAlpha, &v.alpha},
      {kCurve, &v.curve},    {kTilt, &v.tilt},             {kRotation, &v.rotation_deg},
      {kShadowOffset, &v.shadow_offset}, {kBorderWidth, &v.border_width},
      {kLetterSpacing, &v.letter_spacing}, {kOpacity, &v.opacity}, {kJitter, &v.jitter}};
  for (const auto& [e, t] : tables) t->resize(sp.elements[e].choices);
  v.validate(sp);
  return o;
}

}  // namespace ste::io
