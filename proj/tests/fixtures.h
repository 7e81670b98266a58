#pragma once
#include "hopfdde/model.hpp"

// parameter sets used across the suite
inline hopfdde::ModelParams params_1a() {
    return hopfdde::validate_params(30.0, 1.0, 1.0, 1.0, 4.0, 0.1);
}
inline hopfdde::ModelParams params_1b() {
    return hopfdde::validate_params(10.0, 20.0, 1.0, 5.0, 4.0, 0.1);
}
inline hopfdde::ModelParams params_onebranch() {
    return hopfdde::validate_params(1.0, 7.0, 1.0, 5.0, 1.0, 0.1);
}
// K left free; slice studies use with_carrying_capacity
inline hopfdde::ModelParams params_slice(double K) {
    return hopfdde::validate_params(30.0, K, 1.0, 1.0, 4.0, 0.1);
}
