#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace kgntm::checks {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;

    nlohmann::json to_json() const;
};

// Closed-form comment and transcript word probabilities against enumeration
// of the discrete latents on `instances` random small states.
CheckResult marginalization(std::size_t instances = 200, std::uint64_t seed = 1);

// Analytic b'-style bound on E[θ̃_k] against Monte Carlo masking, plus the
// exact two-topic case.
CheckResult theorem_bound(std::size_t vectors = 1000, std::size_t samples = 100000, std::uint64_t seed = 2);

// θ = [0.2, 0.3, 0.5], β = 0.6, mask [1, 0, 1].
CheckResult worked_example();

// Normal, Beta and LogNormal KL closed forms against Monte Carlo, and zero
// for identical distributions.
CheckResult kl_closed_forms(std::size_t per_family = 50, std::size_t samples = 1000000, std::uint64_t seed = 3);

// Every ELBO gradient entry on a K = 3, V = 10 instance against central
// differences with step 1e-5.
CheckResult elbo_gradient(std::uint64_t seed = 4);

// UMass coherence against a direct document scan on random toy corpora.
CheckResult coherence_oracle(std::size_t corpora = 20, std::uint64_t seed = 5);

// All of the above, in order.
std::vector<CheckResult> all_module_oracles();

// Renders one aligned line per check.
std::string format_table(const std::vector<CheckResult>& results);

} // namespace kgntm::checks
