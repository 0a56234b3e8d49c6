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

#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tad {

/// Base class for every error the toolkit raises on bad input or state.
/// The CLI maps these to exit code 1; anything else is an internal error.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public Error {
public:
    ParseError(std::size_t line_no, const std::string& detail)
        : Error("parse error at line " + std::to_string(line_no) + ": " + detail), line_no_(line_no) {}
    std::size_t line_no() const { return line_no_; }

private:
    std::size_t line_no_;
};

class SchemaError : public Error {
public:
    SchemaError(std::string field, const std::string& detail)
        : Error("schema error in field '" + field + "': " + detail), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

#define TAD_SIMPLE_ERROR(Name)                                     \
    class Name : public Error {                                    \
    public:                                                        \
        explicit Name(const std::string& what) : Error(what) {}    \
    };

TAD_SIMPLE_ERROR(VersionError)
TAD_SIMPLE_ERROR(DimError)
TAD_SIMPLE_ERROR(EmptyDayError)
TAD_SIMPLE_ERROR(InsufficientSamples)
TAD_SIMPLE_ERROR(CurveTooShort)
TAD_SIMPLE_ERROR(EmptyWindow)
TAD_SIMPLE_ERROR(StoreError)
TAD_SIMPLE_ERROR(ConflictError)
TAD_SIMPLE_ERROR(RemoteError)
TAD_SIMPLE_ERROR(ProtocolError)
TAD_SIMPLE_ERROR(LineageError)
TAD_SIMPLE_ERROR(MissingClassError)
TAD_SIMPLE_ERROR(IoError)
TAD_SIMPLE_ERROR(ConfigError)

#undef TAD_SIMPLE_ERROR

class LabelError : public Error {
public:
    LabelError(std::size_t row, const std::string& value)
        : Error("unknown label '" + value + "' at row " + std::to_string(row)), row_(row) {}
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

/// Binary misinformation label.
enum class Label : std::int8_t { real = 0, fake = 1 };

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view text);
inline Label flip(Label label) { return label == Label::fake ? Label::real : Label::fake; }

// ---------------------------------------------------------------------------
// Hashing and seed derivation

constexpr std::uint64_t fmix64(std::uint64_t k) {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ULL;
    k ^= k >> 33;
    return k;
}

/// Seeded 64-bit hash: FNV-1a over the bytes, finished with the murmur3
/// avalanche. Stable across platforms; used for feature hashing and ids.
std::uint64_t hash64(std::string_view bytes, std::uint64_t seed);

/// Named seed derivation, e.g. mix(root, "kmeans").
std::uint64_t mix(std::uint64_t seed, std::string_view purpose);
std::uint64_t mix(std::uint64_t seed, std::uint64_t value);

std::string hex64(std::uint64_t value);

inline constexpr std::uint64_t kDefaultSeed = 20200125;

/// Deterministic random source. Only the engine comes from the standard
/// library; the distributions are written out so streams are identical
/// across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);
    double normal();
    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Time

using Instant = std::chrono::sys_seconds;

/// Parses an RFC 3339 timestamp ("2020-01-25T00:00:00Z", offsets and
/// fractional seconds accepted; fractions are truncated to seconds).
std::optional<Instant> parse_rfc3339(std::string_view text);
/// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_rfc3339(Instant t);

struct CivilDate {
    int year;
    unsigned month;
    unsigned day;
};

CivilDate civil_from_instant(Instant t);
Instant instant_from_civil(int year, unsigned month, unsigned day);
/// Midnight UTC of the day containing t.
Instant day_floor(Instant t);

}  // namespace tad
