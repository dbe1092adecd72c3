#pragma once

#include "common.hpp"
#include "field.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lsa {

enum class Activation { Softplus, Sine, Relu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Whether second derivatives of the activation exist everywhere.
bool is_twice_differentiable(Activation a);

struct Architecture {
    int depth = 8;        // hidden layers
    int width = 256;
    int skip_layer = 4;   // hidden layer that also receives the raw input; -1 disables
    Activation activation = Activation::Softplus;
    double sharpness = 100.0;  // softplus beta, or sine frequency
    bool geometric_init = true;
    double init_radius = 0.5;

    void validate() const;
    bool operator==(const Architecture&) const = default;
};

struct LayerShape {
    int in = 0;
    int out = 0;
    std::size_t weight_offset = 0;  // column-major out x in block
    std::size_t bias_offset = 0;
    bool skip_input = false;        // input is concat(previous, query) / sqrt(2)
};

/// Fully connected SDF network f: R^3 -> R. Hidden layers use a C2
/// activation; the output layer is affine. Parameters live in one flat
/// vector so optimizers and checkpoints can treat them uniformly.
class SdfNetwork {
public:
    SdfNetwork(const Architecture& arch, Eigen::VectorXd params, std::uint64_t seed = 0);

    /// Depth-0 network computing w . q + b. Bypasses the init preconditions
    /// so closed-form fields can run through the same machinery.
    static SdfNetwork linear(const Vec3& w, double b);

    const Architecture& architecture() const noexcept { return arch_; }
    std::uint64_t seed() const noexcept { return seed_; }

    std::size_t parameter_count() const noexcept { return static_cast<std::size_t>(params_.size()); }
    const Eigen::VectorXd& parameters() const noexcept { return params_; }
    Eigen::VectorXd& mutable_parameters() noexcept { return params_; }

    int layer_count() const noexcept { return static_cast<int>(layers_.size()); }
    const LayerShape& layer(int l) const { return layers_[static_cast<std::size_t>(l)]; }
    Eigen::Map<const Eigen::MatrixXd> weight(int l) const;
    Eigen::Map<const Eigen::VectorXd> bias(int l) const;

    /// Index of the first non-finite parameter, or -1.
    std::ptrdiff_t first_nonfinite_parameter() const;

private:
    Architecture arch_;
    std::vector<LayerShape> layers_;
    Eigen::VectorXd params_;
    std::uint64_t seed_ = 0;
};

/// Layer shapes implied by an architecture (the last entry is the output layer).
std::vector<LayerShape> layer_shapes(const Architecture& arch);
std::size_t parameter_count(const Architecture& arch);

SdfNetwork init_network(const Architecture& arch, std::uint64_t seed);

/// Field value at q.
double predict(const SdfNetwork& net, const Vec3& q);

/// Adapts a network to the ScalarField interface.
class NetworkField final : public ScalarField {
public:
    explicit NetworkField(const SdfNetwork& net) : net_(net) {}
    FieldSample sample(const Vec3& q) const override;
    double value(const Vec3& q) const override;

private:
    const SdfNetwork& net_;
};

struct Checkpoint {
    SdfNetwork network;
    Normalization normalization;
};

/// Self-describing container: a text header (architecture, seed,
/// normalization in hex floats) followed by raw little-endian doubles.
void save_checkpoint(const std::filesystem::path& path, const SdfNetwork& net,
                     const Normalization& norm = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace lsa
