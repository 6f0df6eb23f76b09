/*
 * JSON checkpoint container for the backbone model.
 */

#include "adaptermix/checkpoint.hpp"

#include <unordered_map>

#include "config_json.hpp"

namespace adaptermix {

namespace {

constexpr const char* kFormat = "adaptermix-checkpoint";
constexpr int kVersion = 1;

}  // namespace

std::string checkpoint_to_string(const BackboneModel& model,
                                 const SeedProvenance& seeds) {
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["model"] = model_config_to_json(model.config());
  doc["adapters"] = model.adapters_inserted()
                        ? strategy_to_json(*model.adapter_strategy())
                        : json(nullptr);
  doc["seeds"] =
      json{{"init", seeds.init_seed}, {"train", seeds.train_seeds}};
  json params = json::array();
  for (const ParamRef& p : model.parameters()) {
    json rec;
    rec["name"] = p.name;
    rec["shape"] = p.tensor.shape();
    rec["trainable"] = p.tensor.requires_grad();
    rec["data"] = std::vector<double>(p.tensor.values().begin(),
                                      p.tensor.values().end());
    params.push_back(std::move(rec));
  }
  doc["params"] = std::move(params);
  return doc.dump();
}

BackboneModel checkpoint_from_string(const std::string& text,
                                     SeedProvenance* seeds_out) {
  const json doc = parse_json(text, "checkpoint");
  if (field_or<std::string>(doc, "format", "", "") != kFormat) {
    throw ConfigError("missing or wrong field 'format' (want " +
                      std::string(kFormat) + ")");
  }
  if (field_as<int>(doc, "version", "") != kVersion) {
    throw ConfigError("unsupported value in field 'version'");
  }
  const ModelConfig config =
      model_config_from_json(require_field(doc, "model", ""), "model");
  const json& seeds = require_field(doc, "seeds", "");
  SeedProvenance prov;
  prov.init_seed = field_as<std::uint64_t>(seeds, "init", "seeds");
  prov.train_seeds =
      field_as<std::vector<std::uint64_t>>(seeds, "train", "seeds");

  BackboneModel model(config, prov.init_seed);
  const json& adapters = require_field(doc, "adapters", "");
  if (!adapters.is_null()) {
    model.insert_adapters(strategy_from_json(adapters, "adapters"), 0);
  }

  auto params = model.parameters();
  std::unordered_map<std::string, Tensor*> by_name;
  by_name.reserve(params.size());
  for (ParamRef& p : params) by_name.emplace(p.name, &p.tensor);

  const json& records = require_field(doc, "params", "");
  if (!records.is_array() || records.size() != params.size()) {
    throw ConfigError("field 'params' has " +
                      std::to_string(records.is_array() ? records.size() : 0) +
                      " records, model wants " + std::to_string(params.size()));
  }
  for (const json& rec : records) {
    const auto name = field_as<std::string>(rec, "name", "params");
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw ConfigError("params: unknown parameter '" + name + "'");
    }
    Tensor& t = *it->second;
    const auto shape = field_as<Shape>(rec, "shape", "params");
    if (shape != t.shape()) {
      throw ShapeError("checkpoint parameter '" + name + "' has shape " +
                       shape_str(shape) + ", model wants " +
                       shape_str(t.shape()));
    }
    auto data = field_as<std::vector<double>>(rec, "data", "params");
    if (data.size() != t.numel()) {
      throw ShapeError("checkpoint parameter '" + name + "' has " +
                       std::to_string(data.size()) + " values, model wants " +
                       std::to_string(t.numel()));
    }
    std::copy(data.begin(), data.end(), t.values().begin());
    t.set_requires_grad(field_as<bool>(rec, "trainable", "params"));
  }
  if (seeds_out) *seeds_out = prov;
  return model;
}

void save_checkpoint(const BackboneModel& model, const SeedProvenance& seeds,
                     const std::string& path) {
  write_text_file(path, checkpoint_to_string(model, seeds) + "\n");
}

BackboneModel load_checkpoint(const std::string& path,
                              SeedProvenance* seeds_out) {
  std::string text = read_text_file(path);
  return checkpoint_from_string(text, seeds_out);
}

BackboneModel clone_model(const BackboneModel& model) {
  SeedProvenance seeds;
  seeds.init_seed = model.init_seed();
  return checkpoint_from_string(checkpoint_to_string(model, seeds));
}

}  // namespace adaptermix
