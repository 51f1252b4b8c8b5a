// Copyright 2026 The qfeedback Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QFB_ERRORS_H
#define QFB_ERRORS_H

#include <stdexcept>
#include <string>

namespace qfb {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operand dimensions disagree (Hilbert dimension, signal dimension, outcome count).
struct DimensionError : Error {
    using Error::Error;
};

/// A value violates a documented invariant (non-Hermitian, not PSD, wrong trace, non-finite...).
struct InvalidArgument : Error {
    using Error::Error;
};

/// A computation produced a non-finite or otherwise unusable number.
struct NumericalError : Error {
    using Error::Error;
};

/// A configured size cap (lattice size, support size, path count) would be exceeded.
struct CapacityError : Error {
    using Error::Error;
};

/// Malformed or unknown run configuration.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace qfb

#endif
