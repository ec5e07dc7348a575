#pragma once

namespace qdtwin {

// A central value with a one-sigma absolute uncertainty.
struct Measured {
    double value = 0.0;
    double err = 0.0;

    double relative_err() const { return value != 0.0 ? err / value : 0.0; }
};

}  // namespace qdtwin
