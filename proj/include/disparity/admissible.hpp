#pragma once

#include <optional>
#include <string>
#include <vector>

#include "disparity/ci.hpp"
#include "disparity/local_mag.hpp"
#include "disparity/mechanism.hpp"

namespace disparity::admissible {

struct CandidateDecision {
    std::string candidate;
    // big_by_lemma_large | small_by_lemma_small | excluded
    std::string status;
    std::string justification;
    std::optional<std::vector<std::string>> witness;
};

struct AdmissibleReport {
    std::vector<std::string> block;  // the mediator(s) under adjustment
    std::vector<std::string> b_tilde;
    std::vector<CandidateDecision> decisions;
    std::vector<std::string> b_m;
    bool identifiable = true;
    std::size_t subsets_visited = 0;
};

/// Mediators: covariates dependent on the exposure and the outcome both
/// marginally and conditionally (on the other endpoint).
std::vector<std::string> detect_mediators(ci::CiSource& src,
                                          const std::vector<std::string>& covariates,
                                          const std::string& exposure, const std::string& outcome,
                                          double alpha);

/// Candidate set: covariates whose learned triple class over (o, m, y) has o
/// adjacent to m, o *-> y, and the m -> y edge in every member. Classes that
/// stay inconsistent after one retry at alpha/2 exclude the candidate.
std::vector<std::string> build_candidates(ci::CiSource& src,
                                          const std::vector<std::string>& covariates,
                                          const std::string& m, const std::string& outcome,
                                          double alpha, const local_mag::Knowledge& know = {});

/// Algorithm steps 5-8 for one mediator (or a joint mediator block): each
/// candidate goes through the context shortcut first, then the subset search
/// of the mechanism-change tests; the admissible set is the union of
/// successes. Refuses (identifiable=false) only when every covariate's triple
/// class forces an arrowhead at m on the m-y edge — the signature of a latent
/// mediator-outcome confounder.
AdmissibleReport assemble_admissible(ci::CiSource& ci_src, mechanism::MechanismSource& mech_src,
                                     const std::vector<std::string>& covariates,
                                     const std::vector<std::string>& block,
                                     const std::string& outcome,
                                     const std::vector<std::string>& contexts, double alpha,
                                     const local_mag::Knowledge& know = {});

}  // namespace disparity::admissible
