#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "exinv/model.hpp"

namespace exinv::testing {

inline std::string model_text(const std::string& name) {
    std::ifstream f(std::string(EXINV_MODELS_DIR) + "/" + name);
    if (!f) throw std::runtime_error("missing model " + name);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline HybridSystem load(const std::string& name) { return parse_system(model_text(name)); }

inline Rational q(const char* s) { return parse_rational(s); }

inline QPoly poly(const std::string& s, const std::vector<std::string>& names) { return parse_polynomial(s, names); }

}  // namespace exinv::testing
