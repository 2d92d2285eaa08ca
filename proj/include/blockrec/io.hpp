#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "blockrec/baselines.hpp"
#include "blockrec/mmsbm.hpp"
#include "blockrec/ratings_table.hpp"

namespace blockrec::io {

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t line = 0)
        : std::runtime_error(line ? msg + " (line " + std::to_string(line) + ")" : msg),
          line(line) {}
    std::size_t line;
};

struct DatasetSpec {
    std::string path;
    char delimiter = '\t';
    std::size_t col_user = 0;
    std::size_t col_item = 1;
    std::size_t col_rating = 2;
    std::size_t skip_lines = 0;
    std::optional<RatingScale> scale;  // auto-inferred when absent
};

struct Dataset {
    RatingsTable table;
    // Dense index -> raw id; the remapping is bijective on observed ids.
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
    std::size_t n_duplicates = 0;
};

// Distinct sorted values become the scale; warns (returns flag) above 20
// distinct values, which usually means continuous data.
RatingScale infer_scale(const std::vector<double>& raw_values, bool* warned_many = nullptr);

Dataset parse_dataset(const DatasetSpec& spec);

// Versioned line-oriented text container for trained models. Doubles
// are rendered shortest-round-trip, so load(save(m)) is bit-exact.
struct ModelFile {
    std::string kind;  // mmsbm | mf | itemitem | naive
    RatingScale scale{std::vector<double>{0.0, 1.0}};
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;

    std::vector<mmsbm::MmsbmModel> mmsbm_models;
    std::optional<baselines::MfModel> mf;
    std::optional<baselines::ItemItemModel> itemitem;
    std::optional<baselines::NaiveModel> naive;
};

void save_model(const ModelFile& file, const std::string& path);
ModelFile load_model(const std::string& path);

// Shortest decimal rendering that parses back to the same double.
std::string render_double(double v);

}  // namespace blockrec::io
