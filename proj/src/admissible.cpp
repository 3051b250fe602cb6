#include "disparity/admissible.hpp"

#include <algorithm>
#include <optional>
#include <set>

namespace disparity::admissible {

namespace {

std::optional<std::vector<graph::MixedGraph>> learn_with_retry(
    ci::CiSource& src, const std::vector<std::string>& vars, double alpha,
    const local_mag::Knowledge& know) {
    for (double a : {alpha, alpha / 2.0}) {
        try {
            return local_mag::learn_local_class(src, vars, a, know);
        } catch (const local_mag::inconsistency_error&) {
            continue;
        }
    }
    return std::nullopt;
}

}  // namespace

std::vector<std::string> detect_mediators(ci::CiSource& src,
                                          const std::vector<std::string>& covariates,
                                          const std::string& exposure, const std::string& outcome,
                                          double alpha) {
    std::vector<std::string> out;
    for (const auto& o : covariates) {
        if (o == exposure || o == outcome) continue;
        const bool dep_r = !src.query(o, exposure, {}, alpha).independent;
        const bool dep_r_y = !src.query(o, exposure, {outcome}, alpha).independent;
        const bool dep_y = !src.query(o, outcome, {}, alpha).independent;
        const bool dep_y_r = !src.query(o, outcome, {exposure}, alpha).independent;
        if (dep_r && dep_r_y && dep_y && dep_y_r) out.push_back(o);
    }
    return out;
}

std::vector<std::string> build_candidates(ci::CiSource& src,
                                          const std::vector<std::string>& covariates,
                                          const std::string& m, const std::string& outcome,
                                          double alpha, const local_mag::Knowledge& know) {
    std::vector<std::string> out;
    for (const auto& o : covariates) {
        if (o == m || o == outcome) continue;
        auto cls = learn_with_retry(src, {o, m, outcome}, alpha, know);
        if (!cls) continue;
        auto tc = local_mag::classify_triple(*cls, o, m, outcome);
        if (tc.o_bridges && tc.my_edge_present) out.push_back(o);
    }
    return out;
}

AdmissibleReport assemble_admissible(ci::CiSource& ci_src, mechanism::MechanismSource& mech_src,
                                     const std::vector<std::string>& covariates,
                                     const std::vector<std::string>& block,
                                     const std::string& outcome,
                                     const std::vector<std::string>& contexts, double alpha,
                                     const local_mag::Knowledge& know) {
    AdmissibleReport rep;
    rep.block = block;
    const std::set<std::string> in_block(block.begin(), block.end());

    // candidates: anything bridging into some block member; for the latent
    // confounding check we also keep each covariate's triple evidence
    std::set<std::string> tilde;
    bool any_class = false;
    bool all_force_arrow_at_m = true;
    for (const auto& o : covariates) {
        if (in_block.count(o) || o == outcome) continue;
        bool forced_for_every_m = true;
        bool bridges_some = false;
        for (const auto& m : block) {
            auto cls = learn_with_retry(ci_src, {o, m, outcome}, alpha, know);
            if (!cls) {
                forced_for_every_m = false;
                continue;
            }
            any_class = true;
            auto tc = local_mag::classify_triple(*cls, o, m, outcome);
            if (tc.o_bridges && tc.my_edge_present) bridges_some = true;
            if (!tc.my_arrow_at_m) forced_for_every_m = false;
        }
        if (bridges_some) tilde.insert(o);
        if (!forced_for_every_m) all_force_arrow_at_m = false;
    }
    rep.b_tilde.assign(tilde.begin(), tilde.end());
    if (any_class && all_force_arrow_at_m) {
        rep.identifiable = false;
        return rep;
    }

    const bool joint = block.size() > 1;
    for (const auto& o : rep.b_tilde) {
        CandidateDecision dec;
        dec.candidate = o;
        // context shortcut (single-mediator route only; the lemma is stated
        // per mediator triple)
        if (!joint) {
            auto big = local_mag::check_lemma_large(ci_src, o, block.front(), outcome, contexts,
                                                    alpha, know);
            if (big.big_member) {
                dec.status = "big_by_lemma_large";
                dec.justification = big.justification;
                rep.decisions.push_back(dec);
                rep.b_m.push_back(o);
                continue;
            }
            dec.justification = big.justification;
        }
        // mechanism-change subset search: first over the other candidates,
        // then widened to the remaining covariates (a confounder of (o, m)
        // need not bridge into y itself)
        std::vector<std::string> pool1;
        for (const auto& c : rep.b_tilde) {
            if (c != o) pool1.push_back(c);
        }
        std::vector<std::string> pool2;
        for (const auto& c : covariates) {
            if (c != o && c != outcome && !in_block.count(c)) pool2.push_back(c);
        }
        auto sm = mechanism::detect_small_membership(mech_src, o, block, outcome, pool1, alpha);
        rep.subsets_visited += sm.subsets_visited;
        if (!sm.member && pool2.size() > pool1.size()) {
            sm = mechanism::detect_small_membership(mech_src, o, block, outcome, pool2, alpha);
            rep.subsets_visited += sm.subsets_visited;
        }
        if (sm.member) {
            dec.status = "small_by_lemma_small";
            dec.witness = sm.witness;
            dec.justification = "mechanism-change tests passed";
            rep.decisions.push_back(dec);
            rep.b_m.push_back(o);
        } else {
            dec.status = "excluded";
            if (dec.justification.empty()) dec.justification = "no witness subset found";
            rep.decisions.push_back(dec);
        }
    }
    return rep;
}

}  // namespace disparity::admissible
