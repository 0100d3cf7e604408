#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "ccfc/model.hpp"
#include "ccfc/synthetic.hpp"

namespace ccfc {

// One JSON document drives every command; flags override individual fields.
struct RunConfig {
  std::string interactions_path;
  std::string schema_path;
  std::string attributes_path;
  std::map<std::string, std::string> dense_feature_paths;
  std::array<double, 3> split_ratios{0.70, 0.15, 0.15};
  Hyperparams hyper;
  std::string variant = "full";
  std::vector<int> eval_ks{5, 10, 20};
  std::string out_dir = "runs/default";
  bool deterministic = true;  // zero wall times in logs so outputs are byte-stable
  int threads = 1;
  bool recall_style_hr = false;
  SyntheticConfig synth;

  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string to_json_text() const;
  void save(const std::string& path) const;

  void validate() const;        // field invariants
  void validate_data_paths() const;  // referenced files must exist
};

}  // namespace ccfc
