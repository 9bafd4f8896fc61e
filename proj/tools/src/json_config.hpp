#pragma once

#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace glom::cli {

/// Reads a JSON object of option values for --config. Keys are long option
/// names without dashes and apply to the subcommand being run; a nested object
/// named after a subcommand applies to that subcommand only.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root = nullptr) : root_(root) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    return resolved(*app, default_also).dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    std::vector<std::string> parents;
    if (root_ != nullptr && !root_->get_subcommands().empty()) {
      parents.push_back(root_->get_subcommands().front()->get_name());
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it->is_object() && root_ != nullptr && root_->get_subcommand_no_throw(it.key()) != nullptr) {
        if (!parents.empty() && parents.front() == it.key()) collect(*it, parents, items);
      } else {
        nlohmann::json single = nlohmann::json::object();
        single[it.key()] = *it;
        collect(single, parents, items);
      }
    }
    return items;
  }

  /// Option values of `app` as typed JSON (numbers and booleans where the
  /// text parses as such).
  static nlohmann::json resolved(const CLI::App& app, bool default_also = true) {
    nlohmann::json j = nlohmann::json::object();
    for (const CLI::Option* opt : app.get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string& name = opt->get_lnames()[0];
      if (name == "config" || name == "help") continue;
      if (opt->get_type_size() == 0) {
        j[name] = opt->count() > 0;
        continue;
      }
      std::vector<std::string> values = opt->results();
      const bool is_list = opt->get_expected_max() > 1;
      if (values.empty() && default_also) values = split_default(opt->get_default_str(), is_list);
      if (values.empty()) {
        j[name] = is_list ? nlohmann::json::array() : nlohmann::json(nullptr);
      } else if (values.size() == 1 && !is_list) {
        j[name] = typed(values[0]);
      } else {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& v : values) arr.push_back(typed(v));
        j[name] = arr;
      }
    }
    return j;
  }

 private:
  // Vector defaults are captured as "[a,b]" or "{}".
  static std::vector<std::string> split_default(const std::string& text, bool is_list) {
    if (text.empty()) return {};
    if (!is_list) return {text};
    std::string body = text;
    if (body == "{}") return {};
    if (body.size() >= 2 && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(body);
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
  }

  static nlohmann::json typed(const std::string& text) {
    if (text == "true") return true;
    if (text == "false") return false;
    nlohmann::json parsed = nlohmann::json::parse(text, nullptr, false);
    if (!parsed.is_discarded() && parsed.is_number()) return parsed;
    return text;
  }

  static std::string scalar_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("unsupported config value " + v.dump());
  }

  static void collect(const nlohmann::json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it->is_object()) {
        auto nested = parents;
        nested.push_back(it.key());
        collect(*it, nested, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = it.key();
      if (it->is_array()) {
        for (const auto& v : *it) item.inputs.push_back(scalar_text(v));
      } else {
        item.inputs = {scalar_text(*it)};
      }
      items.push_back(std::move(item));
    }
  }

  const CLI::App* root_;
};

}  // namespace glom::cli
