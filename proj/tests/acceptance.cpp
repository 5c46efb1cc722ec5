#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "collapse/config.hpp"
#include "collapse/error.hpp"
#include "collapse/output.hpp"
#include "collapse/run.hpp"

using namespace collapse;
namespace fs = std::filesystem;

namespace {

const fs::path kPresets = COLLAPSE_PRESET_DIR;
const fs::path kOut = COLLAPSE_ACCEPTANCE_OUT;

struct Criterion {
    std::string id;
    std::string title;
    std::vector<std::string> presets;
    double limit_s;  // total runtime bound, 0 for none
};

const std::vector<std::string> kPairing = {"pairing_mean_dyson", "pairing_ket_bra", "pairing_a1",
                                           "pairing_a2plus",     "pairing_a3",      "pairing_b2",
                                           "pairing_b3",         "pairing_d1",      "pairing_c1"};

std::vector<Criterion> criteria()
{
    return {
        {"c1", "spatial Lindblad oracle", {"lindblad_spatial_qubit"}, 1.0},
        {"c2", "unraveling consistency", {"simulate_spatial_qubit"}, 30.0},
        {"c3", "no collapse", {"no_collapse_qubit"}, 0.0},
        {"c4", "commutator inner product conservation", {"temporal_conservation"}, 0.0},
        {"c5", "theorem reproduction", {"lindblad_temporal_box", "temporal_theorem"}, 0.0},
        {"c6", "pairing identities", kPairing, 600.0},
        {"c7", "non-adjacent scaling", {"scaling_probe"}, 0.0},
        {"c8", "collapse and Born rule", {"collapse_born"}, 300.0},
        {"c9", "effective Hamiltonian symmetry", {"lindblad_temporal_box", "lindblad_temporal_modulated"}, 0.0},
        {"c10", "Hartree-Fock demo", {"hartree_fock"}, 0.0},
        {"c11", "reproducibility", {}, 0.0},
    };
}

struct PresetRun {
    bool pass = false;
    double seconds = 0.0;
    std::string note;
    std::vector<std::string> files;
};

PresetRun run_preset(const std::string& name, const fs::path& out)
{
    PresetRun r;
    Overrides ov;
    ov.out_dir = out.string();
    auto start = std::chrono::steady_clock::now();
    try {
        RunConfig cfg = parse_config((kPresets / (name + ".json")).string(), ov);
        RunOutcome res = run(cfg, false);
        r.pass = res.pass;
        r.files = res.files;
        std::ostringstream os;
        for (const auto& c : res.report["criteria"]) {
            if (c["pass"].get<bool>()) continue;
            os << " " << c["name"].get<std::string>() << "="
               << format_number(c["value"].is_number() ? c["value"].get<double>() : NAN);
        }
        r.note = os.str();
    } catch (const Error& e) {
        r.note = std::string(" error ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<std::string> all_presets()
{
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(kPresets))
        if (e.path().extension() == ".json") out.push_back(e.path().stem().string());
    std::sort(out.begin(), out.end());
    return out;
}

bool reproducibility(std::string& detail)
{
    bool ok = true;
    int compared = 0;
    std::ostringstream os;
    for (const auto& name : all_presets()) {
        fs::path dir = kOut / "c11" / name;
        fs::remove_all(dir);
        PresetRun first = run_preset(name, dir);
        std::vector<std::string> bytes;
        for (const auto& f : first.files) bytes.push_back(slurp(dir / f));
        PresetRun second = run_preset(name, dir);
        if (first.files.empty() || first.files != second.files) {
            ok = false;
            os << " " << name << ":no-artifacts" << first.note;
            continue;
        }
        for (std::size_t i = 0; i < first.files.size(); ++i) {
            ++compared;
            if (slurp(dir / first.files[i]) != bytes[i]) {
                ok = false;
                os << " " << name << "/" << first.files[i] << ":differs";
            }
        }
    }
    detail = " files=" + std::to_string(compared) + os.str();
    return ok;
}

}  // namespace

int main(int argc, char** argv)
{
    std::vector<std::string> wanted(argv + 1, argv + argc);
    bool all_pass = true;
    int ran = 0;
    for (const auto& c : criteria()) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
        ++ran;
        bool pass = true;
        double total = 0.0;
        std::ostringstream detail;
        if (c.id == "c11") {
            auto start = std::chrono::steady_clock::now();
            std::string d;
            pass = reproducibility(d);
            total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            detail << d;
        } else {
            for (const auto& p : c.presets) {
                fs::path out = kOut / c.id / p;
                fs::remove_all(out);
                PresetRun r = run_preset(p, out);
                total += r.seconds;
                pass = pass && r.pass;
                detail << " " << p << (r.pass ? ":pass" : ":fail") << r.note;
            }
            if (c.limit_s > 0.0 && total > c.limit_s) {
                pass = false;
                detail << " runtime " << total << " s exceeds " << c.limit_s << " s";
            }
        }
        char secs[32];
        std::snprintf(secs, sizeof secs, "%.2f", total);
        std::cout << (pass ? "PASS " : "FAIL ") << c.id << " " << c.title << " (" << secs << " s)" << detail.str()
                  << std::endl;
        all_pass = all_pass && pass;
    }
    if (ran == 0) {
        std::cerr << "no criterion matches; expected c1..c11\n";
        return kExitUsage;
    }
    return all_pass ? kExitPass : kExitCriteriaFail;
}
