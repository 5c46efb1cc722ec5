#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "collapse/spatial.hpp"
#include "collapse/temporal.hpp"

namespace collapse {

using json = nlohmann::json;

const std::vector<std::string>& experiment_names();

struct Overrides {
    std::optional<std::string> experiment;
    std::optional<std::uint64_t> seed;
    std::optional<int> realizations;
    std::optional<std::string> out_dir;
};

struct RunConfig {
    std::string experiment;
    json resolved;  // input with every default filled in
    std::string digest;

    int dim = 0;
    std::vector<HermitianOperator> M;
    std::optional<HermitianOperator> H0;
    std::vector<Channel> channels;
    bool window = true;
    std::optional<HermitianOperator> observable;
    StateVector psi0;
    TimeGrid grid;
    int R = 0;
    std::uint64_t base_seed = 0;
    Stepper stepper = Stepper::UnitaryExp;
    DysonOptions dyson;
    json params;  // experiment section
    std::string out_dir;
    std::vector<std::string> formats;

    SpatialModelSpec spatial() const;
    TemporalModelSpec temporal() const;
    bool wants(const std::string& format) const;
};

RunConfig parse_config_json(json doc, const Overrides& ov = {});
RunConfig parse_config(const std::string& path, const Overrides& ov = {});

// Matrix entries are numbers or [re, im] pairs, rows listed in order.
GeneralOperator parse_matrix(const json& j, int dim, const std::string& where);
StateVector parse_vector(const json& j, int dim, const std::string& where);
json matrix_to_json(const GeneralOperator& m);

std::string fnv1a_hex(const std::string& s);

}  // namespace collapse
