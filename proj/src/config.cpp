#include "lisa/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lisa/errors.hpp"

namespace lisa {

namespace {

using nlohmann::json;

void reject_unknown(const json& object, const std::set<std::string>& allowed,
                    const std::string& where) {
  LISA_REQUIRE(object.is_object(), InvalidInput, where + " must be a JSON object");
  for (const auto& [key, value] : object.items()) {
    LISA_REQUIRE(allowed.contains(key), InvalidInput,
                 "unknown key '" + key + "' in " + where);
  }
}

std::size_t read_count(const json& object, const char* key, std::size_t fallback) {
  if (!object.contains(key)) {
    return fallback;
  }
  const auto& v = object.at(key);
  LISA_REQUIRE(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0),
               InvalidInput, std::string("'") + key + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

}  // namespace

ForwardVariant parse_forward_variant(const std::string& name) {
  if (name == "base") {
    return ForwardVariant::base;
  }
  if (name == "soft") {
    return ForwardVariant::soft;
  }
  throw InvalidInput("unknown forward variant '" + name + "' (expected base or soft)");
}

RunConfig parse_run_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(doc, {"fit", "forward"}, "config");

  RunConfig config;
  if (doc.contains("fit")) {
    const auto& fit = doc.at("fit");
    reject_unknown(fit, {"B", "W", "iters", "seed", "temperature", "refine_passes"}, "fit");
    config.fit.num_books = read_count(fit, "B", config.fit.num_books);
    config.fit.num_words = read_count(fit, "W", config.fit.num_words);
    config.fit.iters = read_count(fit, "iters", config.fit.iters);
    config.fit.seed = read_count(fit, "seed", config.fit.seed);
    config.fit.refine_passes = read_count(fit, "refine_passes", config.fit.refine_passes);
    if (fit.contains("temperature")) {
      LISA_REQUIRE(fit.at("temperature").is_number(), InvalidInput,
                   "'temperature' must be a number");
      config.fit.temperature = fit.at("temperature").get<double>();
      LISA_REQUIRE(config.fit.temperature > 0.0, InvalidInput, "'temperature' must be > 0");
    }
  }
  if (doc.contains("forward")) {
    const auto& fwd = doc.at("forward");
    reject_unknown(fwd, {"mode", "variant", "scale"}, "forward");
    if (fwd.contains("mode")) {
      LISA_REQUIRE(fwd.at("mode").is_string(), InvalidInput, "'mode' must be a string");
      config.forward.mode = parse_attention_mode(fwd.at("mode").get<std::string>());
    }
    if (fwd.contains("variant")) {
      LISA_REQUIRE(fwd.at("variant").is_string(), InvalidInput, "'variant' must be a string");
      config.forward.variant = parse_forward_variant(fwd.at("variant").get<std::string>());
    }
    if (fwd.contains("scale")) {
      const auto& s = fwd.at("scale");
      if (s.is_string()) {
        LISA_REQUIRE(s.get<std::string>() == "rsqrt_d", InvalidInput,
                     "'scale' must be a positive number or \"rsqrt_d\"");
      } else {
        LISA_REQUIRE(s.is_number() && s.get<double>() > 0.0, InvalidInput,
                     "'scale' must be a positive number or \"rsqrt_d\"");
        config.forward.scale = s.get<double>();
      }
    }
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  LISA_REQUIRE(in.good(), Error, "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

}  // namespace lisa
