/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

// Test-side reference implementations. Written from the definitions, not
// from the library code; kept deliberately naive.

#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tad/common.hpp"
#include "tad/ingest.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// Keywords

// Fuzz alphabet: every symbol is listed with its normalized ASCII form, so the
// oracle never needs the library's folding code.
struct Glyph {
    std::string utf8;
    std::string norm;
};

inline const std::vector<Glyph>& fuzz_glyphs() {
    static const std::vector<Glyph> g = [] {
        std::vector<Glyph> v;
        for (char c = 'a'; c <= 'z'; ++c) v.push_back({std::string(1, c), std::string(1, c)});
        for (char c = 'A'; c <= 'Z'; ++c) v.push_back({std::string(1, c), std::string(1, static_cast<char>(c + 32))});
        for (char c = '0'; c <= '9'; ++c) v.push_back({std::string(1, c), std::string(1, c)});
        for (const char* p : {" ", " ", "-", "-", "'", ".", ",", "!", "#", "\t"}) v.push_back({p, p});
        v.push_back({"\xD0\xA1", "c"});      // U+0421 CYRILLIC CAPITAL ES
        v.push_back({"\xD1\x81", "c"});      // U+0441
        v.push_back({"\xD0\x9E", "o"});      // U+041E
        v.push_back({"\xD0\xBE", "o"});      // U+043E
        v.push_back({"\xD0\xB0", "a"});      // U+0430
        v.push_back({"\xCE\x99", "i"});      // U+0399 GREEK CAPITAL IOTA
        v.push_back({"\xEF\xBD\x83", "c"});  // U+FF43 FULLWIDTH c
        v.push_back({"\xEF\xBD\x96", "v"});  // U+FF56 FULLWIDTH v
        return v;
    }();
    return g;
}

// Random text biased toward stem fragments so matches are common. Returns the
// raw text and its normalized form.
inline std::pair<std::string, std::string> fuzz_text(tad::Rng& rng) {
    static const std::vector<std::string> fragments = {"covid", "corona", "vacc", "mask", "n95", "-19", "quarantin",
                                                       "bat", "hoax", "5g", "don't", "virus", "chauve-souris",
                                                       "chauve", "souris", "wuhan", "gates", "lock"};
    const auto& glyphs = fuzz_glyphs();
    std::string raw, norm;
    const auto n = 1 + rng.below(40);
    for (std::uint64_t i = 0; i < n; ++i) {
        if (rng.bernoulli(0.15)) {
            const auto& f = fragments[rng.below(fragments.size())];
            std::string up = f;
            if (rng.bernoulli(0.3)) {
                for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            }
            raw += up;
            norm += f;
        } else {
            const auto& g = glyphs[rng.below(glyphs.size())];
            raw += g.utf8;
            norm += g.norm;
        }
    }
    return {raw, norm};
}

inline bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Splits ASCII normalized text: alphanumerics form tokens; '-' joins only
// before a digit, an apostrophe only before another word character, both only
// inside a token.
inline std::vector<std::string> split_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        const bool has_next = i + 1 < s.size();
        bool joins = word_char(c);
        if (!joins && !cur.empty() && has_next) {
            if (c == '-') joins = std::isdigit(static_cast<unsigned char>(s[i + 1])) != 0;
            else if (c == '\'') joins = word_char(s[i + 1]);
        }
        if (joins) {
            cur += c;
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline bool starts_with(const std::string& s, const std::string& p) { return s.size() >= p.size() && s.compare(0, p.size(), p) == 0; }

// Every (token position, stem) pair; multi-part stems need a run of tokens.
inline std::vector<std::string> match_keywords(const std::string& normalized, const tad::FilterConfig& cfg,
                                               const std::optional<std::string>& lang) {
    const auto toks = split_tokens(normalized);
    std::vector<std::string> out;
    std::vector<bool> used(cfg.specs.size(), false);
    for (std::size_t t = 0; t < toks.size(); ++t) {
        for (std::size_t s = 0; s < cfg.specs.size(); ++s) {
            const auto& spec = cfg.specs[s];
            const bool lang_ok = spec.languages.empty() ||
                                 (lang && std::find(spec.languages.begin(), spec.languages.end(), *lang) != spec.languages.end());
            if (used[s] || !lang_ok) continue;
            std::vector<std::string> stems{spec.base};
            stems.insert(stems.end(), spec.variations.begin(), spec.variations.end());
            bool hit = false;
            for (const auto& stem : stems) {
                const auto parts = split_tokens(stem);
                if (parts.size() <= 1) {
                    hit = hit || starts_with(toks[t], stem);
                    continue;
                }
                if (t + parts.size() > toks.size()) continue;
                bool ok = true;
                for (std::size_t p = 0; p + 1 < parts.size(); ++p) ok = ok && toks[t + p] == parts[p];
                hit = hit || (ok && starts_with(toks[t + parts.size() - 1], parts.back()));
            }
            if (!hit) continue;
            used[s] = true;
            if (std::find(out.begin(), out.end(), spec.base) == out.end()) out.push_back(spec.base);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Geometry

template <typename A, typename B>
double sqdist(const A& a, const B& b) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a(i)) - static_cast<double>(b(i));
        s += d * d;
    }
    return s;
}

// Exhaustive nearest center (lowest index on ties), then the inclusive radius test.
template <typename Points, typename Centers>
std::vector<bool> inside_high_density(const Points& x, const Centers& centers, const std::vector<double>& radii) {
    std::vector<bool> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        Eigen::Index arg = 0;
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
            const double d = sqdist(x.row(i), centers.row(c));
            if (d < best) {
                best = d;
                arg = c;
            }
        }
        out[static_cast<std::size_t>(i)] = std::sqrt(best) <= radii[static_cast<std::size_t>(arg)];
    }
    return out;
}

// Smallest member distance r with strictly more than half of the members at
// distance <= r, by trying every member distance.
inline double high_density_radius(const std::vector<double>& dists) {
    if (dists.empty()) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (double r : dists) {
        std::size_t within = 0;
        for (double d : dists) within += d <= r ? 1 : 0;
        if (2 * within > dists.size()) best = std::min(best, r);
    }
    return best;
}

// Isotropic Gaussian blobs with centers spread on a scale much larger than
// their spread.
inline Eigen::MatrixXd gaussian_blobs(tad::Rng& rng, int k, int per_blob, int dim, double spread = 0.5,
                                      double scale = 10.0) {
    Eigen::MatrixXd centers(k, dim);
    for (int c = 0; c < k; ++c) {
        for (int d = 0; d < dim; ++d) centers(c, d) = (rng.uniform() * 2.0 - 1.0) * scale;
    }
    Eigen::MatrixXd x(k * per_blob, dim);
    for (int c = 0; c < k; ++c) {
        for (int p = 0; p < per_blob; ++p) {
            for (int d = 0; d < dim; ++d) x(c * per_blob + p, d) = centers(c, d) + spread * rng.normal();
        }
    }
    return x;
}

// ---------------------------------------------------------------------------
// Files

class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "tad-test-XXXXXX").string();
        if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

private:
    std::filesystem::path path_;
};

}  // namespace oracle
