#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "exinv/driver.hpp"

using namespace exinv;

namespace {

constexpr int kInputError = 3;

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw InputError("cannot write '" + path.string() + "'");
    f << text;
}

// "3" or "1..4"
std::pair<int, int> parse_range(const std::string& s, const char* what) {
    auto dots = s.find("..");
    try {
        std::size_t used = 0;
        if (dots == std::string::npos) {
            int v = std::stoi(s, &used);
            if (used == s.size()) return {v, v};
        } else {
            int a = std::stoi(s.substr(0, dots), &used);
            if (used == dots) {
                std::string rest = s.substr(dots + 2);
                int b = std::stoi(rest, &used);
                if (used == rest.size()) return {a, b};
            }
        }
    } catch (const std::exception&) {
    }
    throw InputError(std::string("bad ") + what + " '" + s + "'");
}

HybridSystem load_model(const std::string& path) {
    try {
        HybridSystem h = parse_system(read_file(path));
        for (const auto& d : validate_system(h))
            if (d.severity == Diagnostic::Severity::Error) throw InputError("model: " + d.message);
        return h;
    } catch (const ParseError& e) {
        throw InputError(path + ": " + e.what());
    }
}

struct CommonOptions {
    std::string degree = "1..2";
    std::string sos_degree = "1..3";
    std::string denominator = "1000";
    double tau = 1e-10;
    std::string mode = "bmi";
    int split_depth = 0;
    bool split_first = false;
    std::string split_axis;
    std::string split_cut;
    std::uint64_t seed = 1;

    void add(CLI::App* app) {
        app->add_option("--degree", degree, "invariant degree d or range d1..d2");
        app->add_option("--sos-degree", sos_degree, "multiplier half-degree e or range e1..e2 (degree bound 2e)");
        app->add_option("--denominator-bound", denominator, "common denominator bound D");
        app->add_option("--tolerance", tau, "tolerance tau");
        app->add_option("--mode", mode, "bmi | lmi | conjunction | boundary");
        app->add_option("--split-depth", split_depth, "maximum bisection depth");
        app->add_flag("--split-first", split_first, "bisect to the full depth before solving");
        app->add_option("--split-axis", split_axis, "variable to bisect on (default: widest range)");
        app->add_option("--split-cut", split_cut, "cut value (default: midpoint of the range)");
        app->add_option("--seed", seed, "falsifier and sampling seed");
    }

    RunConfig config(const HybridSystem& h) const {
        RunConfig c;
        std::tie(c.d_min, c.d_max) = parse_range(degree, "degree");
        std::tie(c.e_min, c.e_max) = parse_range(sos_degree, "sos degree");
        try {
            c.D = Integer(denominator, 10);
        } catch (const std::exception&) {
            throw InputError("bad denominator bound '" + denominator + "'");
        }
        c.tau = tau;
        auto m = parse_mode(mode);
        if (!m) throw InputError("unknown mode '" + mode + "'");
        c.mode = *m;
        c.split_depth = split_depth;
        c.split_first = split_first;
        if (!split_axis.empty()) {
            auto it = std::find(h.vars.begin(), h.vars.end(), split_axis);
            if (it == h.vars.end()) throw InputError("unknown split axis '" + split_axis + "'");
            c.split_axis = static_cast<std::size_t>(it - h.vars.begin());
        }
        if (!split_cut.empty()) {
            try {
                c.split_cut = parse_rational(split_cut);
            } catch (const std::invalid_argument& e) {
                throw InputError(e.what());
            }
        }
        c.seed = seed;
        try {
            c.validate();
        } catch (const std::invalid_argument& e) {
            throw InputError(e.what());
        }
        return c;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact invariant generation and safety verification for polynomial hybrid systems"};
    app.require_subcommand(1);

    CommonOptions vopt;
    std::string vmodel, out_dir = ".";
    auto* verify = app.add_subcommand("verify", "search for an exact invariant and write certificate.txt and report.txt");
    verify->add_option("model", vmodel, "model file")->required();
    vopt.add(verify);
    verify->add_option("--out", out_dir, "output directory");

    std::string cpath;
    auto* check = app.add_subcommand("check", "re-verify a certificate file");
    check->add_option("certificate", cpath, "certificate file")->required();

    CommonOptions fopt;
    std::string fmodel, conds;
    std::vector<std::string> invs;
    auto* certify = app.add_subcommand("certify", "certify given invariants with recovered multipliers");
    certify->add_option("model", fmodel, "model file")->required();
    certify->add_option("--invariant", invs, "location=polynomial (phi >= 0), one per location")->required();
    certify->add_option("--conditions", conds, "comma-separated condition kinds to check (default: all)");
    fopt.add(certify);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kInputError;
    }

    try {
        if (*verify) {
            HybridSystem h = load_model(vmodel);
            RunConfig cfg = vopt.config(h);
            RunResult r = run_verification(h, cfg);
            std::filesystem::path dir(out_dir);
            std::filesystem::create_directories(dir);
            write_file(dir / "certificate.txt", certificate_json(h, cfg, r).dump(2) + "\n");
            std::string report = render_run(h, r);
            write_file(dir / "report.txt", report);
            std::cout << report;
            return r.exit_code();
        }
        if (*check) {
            nlohmann::ordered_json file;
            try {
                file = nlohmann::ordered_json::parse(read_file(cpath));
            } catch (const nlohmann::json::parse_error& e) {
                throw InputError(std::string("certificate is not valid JSON: ") + e.what());
            }
            CheckResult r = check_certificate(file);
            std::cout << "verdict: " << to_string(r.verdict) << "\n";
            std::cout << "matches stored verdict: " << (r.matches_stored ? "yes" : "no") << "\n";
            for (const auto& m : r.messages) std::cout << "message: " << m << "\n";
            if (!r.matches_stored) return 1;
            return r.verdict == Verdict::Safe ? 0 : r.verdict == Verdict::Falsified ? 2 : 1;
        }
        if (*certify) {
            HybridSystem h = load_model(fmodel);
            RunConfig cfg = fopt.config(h);
            FixedInvariants fixed(h.locations.size());
            for (const auto& spec : invs) {
                auto eq = spec.find('=');
                if (eq == std::string::npos) throw InputError("invariant must be location=polynomial");
                auto l = h.location_index(spec.substr(0, eq));
                if (!l) throw InputError("unknown location in '" + spec + "'");
                try {
                    fixed[*l].push_back(parse_polynomial(spec.substr(eq + 1), h.vars));
                } catch (const ParseError& e) {
                    throw InputError(e.what());
                }
            }
            std::vector<ConditionKind> kinds;
            std::stringstream ss(conds);
            for (std::string k; std::getline(ss, k, ',');) {
                auto kind = parse_condition_kind(k);
                if (!kind) throw InputError("unknown condition kind '" + k + "'");
                kinds.push_back(*kind);
            }
            FixedCheck r = certify_invariants(h, fixed, cfg, kinds);
            std::cout << r.report.render(h);
            if (!r.note.empty()) std::cout << "note: " << r.note << "\n";
            return r.report.verdict == Verdict::Safe ? 0 : r.report.verdict == Verdict::Falsified ? 2 : 1;
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    }
    return kInputError;
}
