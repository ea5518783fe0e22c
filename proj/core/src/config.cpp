#include "kw/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace kw {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& context) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError(context + ": unknown key '" + it.key() + "'");
    }
  }
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

int get_int(const json& obj, const char* key, int def, const std::string& context) {
  const json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_number_integer()) {
    throw ConfigError(context + ": '" + std::string(key) + "' must be an integer");
  }
  return v->get<int>();
}

int need_int(const json& obj, const char* key, const std::string& context) {
  const json* v = find(obj, key);
  if (!v) throw ConfigError(context + ": missing '" + std::string(key) + "'");
  if (!v->is_number_integer()) {
    throw ConfigError(context + ": '" + std::string(key) + "' must be an integer");
  }
  return v->get<int>();
}

double get_double(const json& obj, const char* key, double def, const std::string& context) {
  const json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_number()) {
    throw ConfigError(context + ": '" + std::string(key) + "' must be a number");
  }
  return v->get<double>();
}

bool get_bool(const json& obj, const char* key, bool def, const std::string& context) {
  const json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_boolean()) {
    throw ConfigError(context + ": '" + std::string(key) + "' must be a boolean");
  }
  return v->get<bool>();
}

std::string get_str(const json& obj, const char* key, const std::string& def,
                    const std::string& context) {
  const json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_string()) {
    throw ConfigError(context + ": '" + std::string(key) + "' must be a string");
  }
  return v->get<std::string>();
}

std::string need_str(const json& obj, const char* key, const std::string& context) {
  const json* v = find(obj, key);
  if (!v) throw ConfigError(context + ": missing '" + std::string(key) + "'");
  if (!v->is_string()) {
    throw ConfigError(context + ": '" + std::string(key) + "' must be a string");
  }
  return v->get<std::string>();
}

uint64_t get_seed(const json& obj, const char* key, uint64_t def, const std::string& context) {
  const json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_number_integer()) {
    throw ConfigError(context + ": '" + std::string(key) + "' must be an integer seed");
  }
  return v->get<uint64_t>();
}

Manifest parse_model_and_warehouse(const json& root) {
  Manifest m;
  const json* model = find(root, "model");
  if (!model || !model->is_object()) throw ConfigError("config: missing 'model' section");
  check_keys(*model, {"input", "classes", "layers"}, "model");

  const json* input = find(*model, "input");
  if (!input || !input->is_object()) throw ConfigError("model: missing 'input' shape");
  check_keys(*input, {"c", "h", "w"}, "model.input");
  m.input.c = need_int(*input, "c", "model.input");
  m.input.h = need_int(*input, "h", "model.input");
  m.input.w = need_int(*input, "w", "model.input");
  m.num_classes = need_int(*model, "classes", "model");

  const json* layers = find(*model, "layers");
  if (!layers || !layers->is_array() || layers->empty()) {
    throw ConfigError("model: 'layers' must be a non-empty array");
  }
  std::string prev;
  for (const auto& jl : *layers) {
    if (!jl.is_object()) throw ConfigError("model.layers: entries must be objects");
    check_keys(jl,
               {"id", "binding", "k", "f", "stride", "pad", "group", "n", "bn", "relu", "input",
                "add_from"},
               "model.layers");
    LayerDef l;
    l.id = need_str(jl, "id", "model.layers");
    const std::string context = "layer '" + l.id + "'";
    l.binding = binding_from_string(get_str(jl, "binding", "plain", context));
    l.k = need_int(jl, "k", context);
    l.f = need_int(jl, "f", context);
    l.stride = get_int(jl, "stride", 1, context);
    l.pad = get_int(jl, "pad", 0, context);
    l.group = get_str(jl, "group", "", context);
    l.dyconv_n = get_int(jl, "n", 0, context);
    l.bn = get_bool(jl, "bn", true, context);
    l.relu = get_bool(jl, "relu", true, context);
    l.input = get_str(jl, "input", prev.empty() ? "input" : prev, context);
    l.add_from = get_str(jl, "add_from", "", context);
    prev = l.id;
    m.layers.push_back(std::move(l));
  }

  const json* wh = find(root, "warehouse");
  if (wh) {
    if (!wh->is_object()) throw ConfigError("config: 'warehouse' must be an object");
    check_keys(*wh, {"budget", "groups", "beta", "attention"}, "warehouse");
    if (const json* b = find(*wh, "budget")) {
      if (b->is_string()) {
        m.budget = parse_rational(b->get<std::string>());
      } else if (b->is_number_integer()) {
        m.budget = Rational{b->get<long long>(), 1};
      } else {
        throw ConfigError("warehouse: 'budget' must be a rational string like \"1/2\"");
      }
    }
    if (const json* groups = find(*wh, "groups")) {
      if (!groups->is_array()) throw ConfigError("warehouse: 'groups' must be an array");
      for (const auto& jg : *groups) {
        check_keys(jg, {"id", "divisors"}, "warehouse.groups");
        GroupDef g;
        g.id = need_str(jg, "id", "warehouse.groups");
        if (const json* d = find(jg, "divisors")) {
          const std::string context = "group '" + g.id + "' divisors";
          check_keys(*d, {"spatial", "c", "f"}, context);
          g.divisors.spatial = get_int(*d, "spatial", 1, context);
          g.divisors.c = get_int(*d, "c", 1, context);
          g.divisors.f = get_int(*d, "f", 1, context);
        }
        m.groups.push_back(std::move(g));
      }
    }
    if (const json* beta = find(*wh, "beta")) {
      check_keys(*beta, {"strategy", "param"}, "warehouse.beta");
      m.beta.strategy =
          beta_strategy_from_string(get_str(*beta, "strategy", "one_to_one", "warehouse.beta"));
      m.beta.param = get_int(*beta, "param", 1, "warehouse.beta");
    }
    m.attn = attn_func_from_string(get_str(*wh, "attention", "caf", "warehouse"));
  }
  return m;
}

TrainConfig parse_train(const json& root) {
  TrainConfig t;
  const json* jt = find(root, "train");
  if (!jt) return t;
  if (!jt->is_object()) throw ConfigError("config: 'train' must be an object");
  check_keys(*jt, {"epochs", "batch_size", "warmup_epochs", "lr", "momentum", "weight_decay",
                   "seed"},
             "train");
  t.epochs = get_int(*jt, "epochs", t.epochs, "train");
  t.batch_size = get_int(*jt, "batch_size", t.batch_size, "train");
  t.warmup_epochs = get_int(*jt, "warmup_epochs", t.warmup_epochs, "train");
  t.optim.lr = get_double(*jt, "lr", t.optim.lr, "train");
  t.optim.momentum = get_double(*jt, "momentum", t.optim.momentum, "train");
  t.optim.weight_decay = get_double(*jt, "weight_decay", t.optim.weight_decay, "train");
  t.seed = get_seed(*jt, "seed", t.seed, "train");
  if (t.epochs < 0) throw ConfigError("train: 'epochs' must be >= 0");
  if (t.batch_size < 1) throw ConfigError("train: 'batch_size' must be >= 1");
  if (t.warmup_epochs < 0) throw ConfigError("train: 'warmup_epochs' must be >= 0");
  return t;
}

SynthConfig parse_data(const json& root, const Manifest& m) {
  SynthConfig d;
  d.classes = m.num_classes;
  d.c = m.input.c;
  d.h = m.input.h;
  d.w = m.input.w;
  const json* jd = find(root, "data");
  if (!jd) return d;
  if (!jd->is_object()) throw ConfigError("config: 'data' must be an object");
  check_keys(*jd, {"train_size", "test_size", "noise", "seed"}, "data");
  d.train_size = get_int(*jd, "train_size", d.train_size, "data");
  d.test_size = get_int(*jd, "test_size", d.test_size, "data");
  d.noise = get_double(*jd, "noise", d.noise, "data");
  d.seed = get_seed(*jd, "seed", d.seed, "data");
  return d;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  check_keys(root, {"model", "warehouse", "train", "data"}, "config");

  try {
    RunConfig rc;
    rc.manifest = parse_model_and_warehouse(root);
    rc.train = parse_train(root);
    rc.data = parse_data(root, rc.manifest);
    return rc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

}  // namespace kw
