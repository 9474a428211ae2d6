// SPDX-License-Identifier: Apache-2.0
//
// cfmimo: hybrid beamforming and pilot assignment for cell-free massive MIMO
// Copyright (C) 2026 The cfmimo authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CFMIMO_CORE_HPP
#define CFMIMO_CORE_HPP

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cfmimo
{

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double pi = 3.14159265358979323846;

inline constexpr const char* version = "0.1.0";

// Malformed or out-of-range user input. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// A numerical routine could not produce a trustworthy result. Exit code 3.
class NumericalError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// Dense row-major table indexed by (AP m, UE k).
template <typename T>
class Grid
{
  public:
    Grid() = default;
    Grid(std::size_t rows, std::size_t cols, const T& init = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, init)
    {
    }

    T& operator()(std::size_t m, std::size_t k) { return data_[m * cols_ + k]; }
    const T& operator()(std::size_t m, std::size_t k) const { return data_[m * cols_ + k]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

// ---------------------------------------------------------------------------
// Random streams
//
// Every random draw in the pipeline comes from an engine seeded by
// derive_seed(seed, stream, index). Streams never share state, so a given
// (seed, stream, index) triple always reproduces the same draw no matter how
// work is distributed across threads.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

enum class Stream : std::uint64_t
{
    topology = 1,
    shadowing = 2,
    channel = 3,
    pilot_noise = 4,
    calibration = 5,
    random_pilots = 6,
    drop = 7,
    test = 99,
};

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index)
{
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    return splitmix64(h ^ (index * 0xd1b54a32d192ed03ULL));
}

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0)
{
    std::seed_seq seq{static_cast<std::uint32_t>(derive_seed(seed, stream, index)),
                      static_cast<std::uint32_t>(derive_seed(seed, stream, index) >> 32)};
    return Rng(seq);
}

// Circularly-symmetric CN(0, 1) entries.
inline CVec complex_normal(Rng& rng, Eigen::Index n)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s = 1.0 / std::sqrt(2.0);
    CVec out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double re = normal(rng);
        const double im = normal(rng);
        out(i) = cplx(re * s, im * s);
    }
    return out;
}

inline CMat complex_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols)
{
    CMat out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        out.col(c) = complex_normal(rng, rows);
    return out;
}

} // namespace cfmimo

#endif
