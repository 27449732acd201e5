#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace burnsem {

enum class VariableKind { latent, observed_indicator, observed_composite };

struct Scale {
    enum class Type { ordinal, likert_0_6, continuous_score };
    Type type = Type::continuous_score;
    std::vector<std::string> levels;  // ordinal only; code k is levels[k - 1]

    bool operator==(const Scale&) const = default;
};

struct VariableDef {
    std::string name;
    VariableKind kind = VariableKind::latent;
    Scale scale;

    bool operator==(const VariableDef&) const = default;
};

// Fixed entries keep `value`; free entries use it as the starting value.
struct ParamStatus {
    bool free = true;
    double value = 0.0;

    static ParamStatus fixed(double v) { return {false, v}; }
    static ParamStatus free_from(double v) { return {true, v}; }

    bool operator==(const ParamStatus&) const = default;
};

struct LoadingSpec {
    std::string latent;
    std::string indicator;
    ParamStatus status;

    bool operator==(const LoadingSpec&) const = default;
};

struct PathSpec {
    std::string source;
    std::string target;
    ParamStatus status;

    bool operator==(const PathSpec&) const = default;
};

enum class VarianceKind { exogenous_latent, structural_residual, indicator_residual };

struct VarianceSpec {
    std::string node;
    VarianceKind kind = VarianceKind::exogenous_latent;
    ParamStatus status;

    bool operator==(const VarianceSpec&) const = default;
};

struct ModelSpec {
    std::string name;
    std::vector<VariableDef> variables;
    std::vector<LoadingSpec> loadings;
    std::vector<PathSpec> paths;
    std::vector<VarianceSpec> variances;
    std::vector<std::string> observed_order;

    const VariableDef* find_variable(std::string_view name) const;

    bool operator==(const ModelSpec&) const = default;
};

inline constexpr double kDefaultLoadingStart = 0.1;
inline constexpr double kDefaultPathStart = 0.1;
inline constexpr double kDefaultVarianceStart = 0.5;

// Built-in specifications over the ten manifest variables
// CT1..CT4, RT1, RT2, RC1, SF_EE, SF_DP, SF_PA.
//
// The literal variant regresses BO on CT, RT, RC and the three subscale
// composites but gives BO no indicator, so the six paths and the BO residual
// cannot move the implied covariance. The identified variant is the MIMIC
// repair: CT, RT, RC -> BO -> {SF_EE, SF_DP, SF_PA}.
ModelSpec builtin_paper_literal();
ModelSpec builtin_identified_variant();

// Resolves "paper-literal" / "identified"; returns nullopt for other names.
std::optional<ModelSpec> builtin_model(std::string_view name);

enum class EntryKind { path, loading, variance, residual };

// One cell of the system matrices, free or fixed.
//   path:     B(row = target node, col = source node)
//   loading:  Lambda(row = observed index, col = node)
//   variance: Psi(row = col = node)
//   residual: Theta(row = col = observed index)
struct ModelEntry {
    EntryKind kind = EntryKind::path;
    std::string label;
    std::string first;   // source / latent / node / indicator
    std::string second;  // target / indicator / "" / ""
    VarianceKind variance_kind = VarianceKind::exogenous_latent;
    Eigen::Index row = 0;
    Eigen::Index col = 0;
    ParamStatus status;
    std::optional<Eigen::Index> free_index;
    bool implicit = false;  // unit loading of a composite that sits in the path graph
};

struct SystemMatrices {
    Eigen::MatrixXd lambda;  // observed x nodes
    Eigen::MatrixXd beta;    // nodes x nodes, beta(target, source)
    Eigen::MatrixXd psi;     // nodes x nodes, diagonal
    Eigen::MatrixXd theta;   // observed x observed, diagonal
};

using ParameterVector = Eigen::VectorXd;

// A validated, immutable model. Construction runs every ModelSpec invariant
// check and throws ValidationError naming the offending element.
class Model {
public:
    explicit Model(ModelSpec spec);

    const ModelSpec& spec() const { return spec_; }
    const std::string& name() const { return spec_.name; }

    // Structural nodes: latents in declaration order, then observed
    // composites that appear in the path graph.
    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::vector<std::string>& observed() const { return spec_.observed_order; }
    Eigen::Index node_count() const { return static_cast<Eigen::Index>(nodes_.size()); }
    Eigen::Index observed_count() const { return static_cast<Eigen::Index>(spec_.observed_order.size()); }

    const std::vector<ModelEntry>& entries() const { return entries_; }
    // Free entries, in parameter-vector order.
    const std::vector<const ModelEntry*>& free_parameters() const { return free_; }
    Eigen::Index free_count() const { return static_cast<Eigen::Index>(free_.size()); }
    std::vector<std::string> parameter_labels() const;
    std::optional<Eigen::Index> parameter_index(std::string_view label) const;

    std::optional<Eigen::Index> node_index(std::string_view name) const;
    std::optional<Eigen::Index> observed_index(std::string_view name) const;

    ParameterVector initial_parameters() const;
    SystemMatrices unpack(const ParameterVector& theta) const;
    ParameterVector pack(const SystemMatrices& m) const;

    // True for free parameters that can change the implied covariance: the
    // entry's node (or the path's target) reaches an observed variable.
    const std::vector<bool>& influences_sigma() const { return influences_sigma_; }
    std::vector<std::string> unidentified_parameters() const;

    bool is_variance_parameter(Eigen::Index i) const;

private:
    ModelSpec spec_;
    std::vector<std::string> nodes_;
    std::vector<ModelEntry> entries_;
    std::vector<const ModelEntry*> free_;
    std::vector<bool> influences_sigma_;
};

ParameterVector pack_parameters(const Model& model);
ParameterVector pack_parameters(const Model& model, const SystemMatrices& m);
SystemMatrices unpack_parameters(const Model& model, const ParameterVector& theta);

// JSON model config: keys variables, loadings, paths, variances,
// observed_order (plus optional name). Throws ParseError / ValidationError.
ModelSpec parse_model(std::string_view text);
std::string serialize_model(const ModelSpec& spec);

std::string_view to_string(VariableKind k);
std::string_view to_string(VarianceKind k);

}  // namespace burnsem
