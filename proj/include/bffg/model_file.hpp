#ifndef BFFG_MODEL_FILE_HPP
#define BFFG_MODEL_FILE_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "bffg/infer.hpp"
#include "bffg/tree.hpp"

namespace bffg {

/// A number, or an affine function scale * theta[param] + offset of a named parameter.
struct ParamRef {
    double value = 0.0;
    std::optional<std::string> param;
    double scale = 1.0;
    double offset = 0.0;

    double resolve(const std::map<std::string, double>& theta) const;
    bool operator==(const ParamRef&) const = default;
};

using RefVector = std::vector<ParamRef>;
using RefMatrix = std::vector<RefVector>;

struct ParameterSpec {
    std::string name;
    double init = 0.0;
    double lower = 0.0;
    double upper = 1.0;
    double step = 0.1;
    bool operator==(const ParameterSpec&) const = default;
};

struct VertexSpec {
    std::string id;
    VertexKind kind = VertexKind::finite;
    std::size_t dim = 0;
    bool operator==(const VertexSpec&) const = default;
};

struct DriftRef {
    std::string name;
    RefVector params;
    bool operator==(const DriftRef&) const = default;
};

/// Kernel description; which fields are used depends on `type`:
/// finite (matrix, markov), linear_gaussian (B, beta, Gamma), nonlinear_gaussian (drift, Gamma),
/// sde (drift, sigma, t0, t1, steps) and linear_sde (B, beta, sigma, t0, t1, steps).
struct KernelSpec {
    std::string type;
    RefMatrix matrix;
    bool markov = true;
    RefMatrix B;
    RefVector beta;
    RefMatrix Gamma;
    RefMatrix sigma;
    std::optional<DriftRef> drift;
    double t0 = 0.0;
    double t1 = 1.0;
    std::optional<std::size_t> steps;
    bool operator==(const KernelSpec&) const = default;
};

struct EdgeSpec {
    std::string parent;
    std::string child;
    KernelSpec kernel;
    std::optional<KernelSpec> approx;
    bool operator==(const EdgeSpec&) const = default;
};

struct ObservationSpec {
    std::string id;
    std::string vertex;
    /// "finite" (lambda) or "gaussian" (L, Sigma).
    std::string type;
    RefMatrix lambda;
    RefMatrix L;
    RefMatrix Sigma;
    std::variant<std::size_t, std::vector<double>> value;
    bool operator==(const ObservationSpec&) const = default;
};

struct PriorSpec {
    /// "finite" (weights), "gaussian" (mean, cov) or "dirac" (value).
    std::string type;
    RefVector weights;
    RefVector mean;
    RefMatrix cov;
    RefVector value;
    bool operator==(const PriorSpec&) const = default;
};

/// A parsed model file. Parameter references stay symbolic until instantiate().
struct ModelSpec {
    std::vector<ParameterSpec> parameters;
    std::vector<VertexSpec> vertices;
    PriorSpec prior;
    std::vector<EdgeSpec> edges;
    std::vector<ObservationSpec> observations;

    /// Line of every JSON pointer in the source document, for error messages.
    std::map<std::string, std::size_t> lines;
    std::string source_name;

    bool operator==(const ModelSpec& other) const;
};

/// Parses and schema-checks a model document. Errors are ValidationError with
/// "<source>:<line>: " prefixes.
ModelSpec parse_model(const std::string& text, const std::string& source_name = "model");
ModelSpec load_model(const std::string& path);

nlohmann::json to_json(const ModelSpec& spec);

/// Parameter values by name, defaulting to each parameter's init.
Vector initial_theta(const ModelSpec& spec);
ParamSpace param_space(const ModelSpec& spec);

/// Builds the validated tree at the given parameter vector (ordered as spec.parameters).
/// Intractable edges without an explicit approximation get the registry linearization
/// with matching diffusivity on the same grid.
TreeModel instantiate(const ModelSpec& spec, const Vector& theta);
ModelBuilder model_builder(const ModelSpec& spec);

} // namespace bffg

#endif // BFFG_MODEL_FILE_HPP
