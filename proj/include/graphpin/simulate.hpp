#pragma once

#include <memory>
#include <string>
#include <vector>

#include "graphpin/client.hpp"
#include "graphpin/protocol.hpp"

// Deterministic discrete-event driver: parties act on a logical clock, one
// message per tick, deadlines jumped when the obligated side stalls.

namespace graphpin {

struct SubmitterSpec {
    enum class Kind { Honest, WrongResult, Silent, WrongChildren } kind = Kind::Honest;
    ResultFault fault;          // WrongResult
    int misbehave_after = 0;    // messages sent before going silent / corrupting
};

struct VerifierSpec {
    enum class Kind {
        Honest,          // challenges iff its own result disagrees
        Vigilant,        // always challenges, then plays the honest strategy
        Silent,          // never challenges
        SpuriousResult,  // challenges a correct claim, descends leftmost, disputes the result
        SpuriousOperand, // as above but disputes an operand
        SilentAfterChallenge,
        WrongSelect,     // challenges, then only sends invalid selections
    } kind = Kind::Honest;
    bool challenge_at_deadline = false; // malicious worst case

    bool plays_honest() const { return kind == Kind::Honest || kind == Kind::Vigilant; }
};

struct SimResult {
    Verdict verdict;
    Tick ticks = 0;
    int disputes = 0;
    int max_p1_rounds = 0;
    int max_p2_rounds = 0;
    uint64_t message_bytes = 0;
    std::vector<TranscriptEntry> transcript;
};

class DisputeSimulation {
  public:
    // `shared_honest` lets sweeps reuse one honest party's trace and trees
    // across many trials; every honest verifier computes the same data.
    DisputeSimulation(const TaskSetup& setup, SubmitterSpec sub, std::vector<VerifierSpec> verifiers,
                      std::shared_ptr<PartyData> shared_honest = nullptr)
        : setup_(&setup), sub_spec_(sub), ver_specs_(std::move(verifiers)) {
        std::vector<std::string> quorum{"submitter"};
        for (size_t i = 0; i < ver_specs_.size(); ++i) quorum.push_back("verifier" + std::to_string(i));
        arb_ = std::make_unique<Arbitrator>(setup.record, setup.params, quorum);
        honest_ = shared_honest ? std::move(shared_honest) : std::make_shared<PartyData>(setup);
        if (sub_spec_.kind == SubmitterSpec::Kind::WrongResult) {
            sub_spec_.fault.active = true;
            submitter_ = std::make_unique<PartyData>(setup, sub_spec_.fault);
        }
    }

    PartyData& submitter_data() { return submitter_ ? *submitter_ : *honest_; }
    PartyData& honest_data() { return *honest_; }

    // A submitter the caller can corrupt without touching the verifiers' view.
    PartyData& mutable_submitter() {
        if (!submitter_) submitter_ = std::make_unique<PartyData>(*setup_);
        return *submitter_;
    }

    SimResult run() {
        SimResult res;
        Tick clock = 0;
        Claim claim = submitter_data().make_claim("submitter");
        arb_->submit_claim(clock, claim);
        bool claim_is_correct = claim.output_digest == honest_->claim_digest();

        int guard = 0;
        while (!arb_->terminal()) {
            if (++guard > 1000000) throw std::logic_error("simulation did not terminate");
            step(clock, claim_is_correct, res);
            res.max_p1_rounds = std::max(res.max_p1_rounds, arb_->p1_rounds());
            res.max_p2_rounds = std::max(res.max_p2_rounds, arb_->p2_rounds());
        }
        res.verdict = *arb_->verdict();
        res.ticks = clock;
        res.transcript = arb_->transcript();
        for (const auto& e : res.transcript) res.message_bytes += e.message_bytes;
        return res;
    }

  private:
    struct Mirror {
        uint32_t level = 0;
        uint64_t prefix = 0;
    };

    void step(Tick& clock, bool claim_is_correct, SimResult& res) {
        switch (arb_->obligation()) {
            case Obligation::VerifierChallenge: {
                // next willing, unfailed verifier
                for (size_t i = 0; i < ver_specs_.size(); ++i) {
                    std::string name = "verifier" + std::to_string(i);
                    if (arb_->failed_verifiers().count(name)) continue;
                    const VerifierSpec& v = ver_specs_[i];
                    bool wants = false;
                    switch (v.kind) {
                        case VerifierSpec::Kind::Honest: wants = !claim_is_correct; break;
                        case VerifierSpec::Kind::Silent: wants = false; break;
                        default: wants = true; break;
                    }
                    if (!wants) continue;
                    clock = v.challenge_at_deadline ? arb_->deadline() : clock + 1;
                    arb_->challenge(clock, name);
                    active_ = static_cast<int>(i);
                    mirror_ = {};
                    res.disputes += 1;
                    return;
                }
                clock = arb_->deadline() + 1;
                arb_->timeout(clock, "anyone");
                return;
            }
            case Obligation::SubmitterTrident: {
                if (submitter_stalls()) return stall(clock, verifier_name());
                clock += 1;
                sent_ += 1;
                if (arb_->phase() == Phase::NarrowP1) {
                    auto t = submitter_data().p1_trident();
                    if (corrupt_now()) t[1].bytes[0] ^= 1;
                    arb_->post_trident(clock, "submitter", t[0], t[1], t[2]);
                } else {
                    auto t = submitter_data().p2_trident(arb_->pinned_op_index());
                    if (corrupt_now()) t[1].bytes[0] ^= 1;
                    arb_->post_trident(clock, "submitter", t[0], t[1], t[2], t[3], t[4], t[5]);
                }
                return;
            }
            case Obligation::VerifierTridentSelect: {
                const VerifierSpec& v = spec();
                if (verifier_stalls(v)) return stall(clock, "submitter");
                clock += 1;
                TridentBranch br = v.plays_honest() ? honest_trident_choice() : TridentBranch::Body;
                mirror_ = {};
                arb_->select_trident(clock, verifier_name(), br);
                return;
            }
            case Obligation::SubmitterChildren: {
                if (submitter_stalls()) return stall(clock, verifier_name());
                clock += 1;
                sent_ += 1;
                std::vector<Digest> children =
                    arb_->phase() == Phase::NarrowP1
                        ? submitter_data().p1_children(mirror_.level, mirror_.prefix)
                        : submitter_data().p2_children(arb_->pinned_op_index(), mirror_.level, mirror_.prefix);
                if (corrupt_now()) children[0].bytes[0] ^= 1;
                arb_->respond_children(clock, "submitter", children);
                return;
            }
            case Obligation::VerifierSelect: {
                const VerifierSpec& v = spec();
                if (verifier_stalls(v)) return stall(clock, "submitter");
                if (v.kind == VerifierSpec::Kind::WrongSelect) {
                    clock += 1;
                    arb_->select_child(clock, verifier_name(), setup_->params.k + 7); // rejected call
                    clock = arb_->deadline() + 1;
                    arb_->timeout(clock, "submitter");
                    return;
                }
                clock += 1;
                uint32_t pick = 0;
                auto posted = arb_->pending_children();
                if (v.plays_honest()) {
                    auto own = own_children(mirror_.level, mirror_.prefix);
                    for (uint32_t c = 0; c < posted.size(); ++c)
                        if (posted[c] != own[c]) {
                            pick = c;
                            break;
                        }
                }
                mirror_.level += 1;
                mirror_.prefix = mirror_.prefix * setup_->params.k + pick;
                arb_->select_child(clock, verifier_name(), pick);
                return;
            }
            case Obligation::SubmitterReveal: {
                if (submitter_stalls()) return stall(clock, verifier_name());
                clock += 1;
                sent_ += 1;
                TridentBranch br = *arb_->narrow_branch();
                uint64_t idx = arb_->narrow_leaf_index();
                if (arb_->phase() == Phase::LeafArbP1) {
                    arb_->reveal_leaf(clock, "submitter", submitter_data().p1_leaf_bytes(br, idx),
                                      submitter_data().p1_reveal_cells(br, idx));
                } else {
                    uint64_t op = arb_->pinned_op_index();
                    arb_->reveal_leaf(clock, "submitter", submitter_data().p2_leaf_bytes(op, br, idx),
                                      submitter_data().p2_reveal_cells(op, br, idx));
                }
                return;
            }
            case Obligation::VerifierDeclare: {
                const VerifierSpec& v = spec();
                if (verifier_stalls(v)) return stall(clock, "submitter");
                clock += 1;
                arb_->declare_dispute(clock, verifier_name(), choose_dispute(v));
                return;
            }
            case Obligation::SubmitterBundle: {
                if (submitter_stalls()) return stall(clock, verifier_name());
                clock += 1;
                sent_ += 1;
                TridentBranch br = *arb_->narrow_branch();
                uint64_t idx = arb_->narrow_leaf_index();
                const LeafDispute& d = *arb_->dispute();
                if (arb_->phase() == Phase::LeafArbP1) {
                    arb_->arbitrate_leaf_p1(clock, "submitter", submitter_data().p1_bundle(br, idx, d));
                    if (arb_->phase() == Phase::NarrowP2) mirror_ = {};
                } else {
                    arb_->arbitrate_leaf_p2(clock, "submitter",
                                            submitter_data().p2_bundle(arb_->pinned_op_index(), br, idx, d));
                }
                return;
            }
            default:
                throw std::logic_error("unexpected obligation");
        }
    }

    // Honest trident choice: leftmost item whose posted digest diverges from
    // this verifier's view, where the in/out items are checked against their
    // forced encodings (the unanimous inputs, the claim, the pinned phase-1
    // fields), so an internally inconsistent commitment is steered onto the
    // item that exposes it.
    TridentBranch honest_trident_choice() {
        auto posted = arb_->trident();
        if (arb_->phase() == Phase::NarrowP1) {
            const auto& c = honest_->p1c();
            if (posted[0] != c.in_digest) return TridentBranch::In;
            if (posted[1] != c.body.root) return TridentBranch::Body;
            Digest expected_out = leaf_digest(
                TreeKind::P1C, encode_p1c_leaf(ViTag::Out, Digest{}, arb_->claim()->output_digest, Digest{}));
            if (posted[2] != expected_out) return TridentBranch::Out;
            return TridentBranch::Body;
        }
        auto& mine = honest_->p2(arb_->pinned_op_index());
        if (posted[0] != mine.p2c.in_digest) return TridentBranch::In;
        if (posted[1] != mine.p2c.body.root) return TridentBranch::Body;
        uint32_t count = static_cast<uint32_t>(mine.circuit->outputs.size());
        Digest expected_out = leaf_digest(TreeKind::P2C, encode_vi_leaf(ViTag::Out, kKindNone,
                                                                        arb_->pinned_outputs_root(),
                                                                        kResultTagCount, count));
        if (posted[2] != expected_out) return TridentBranch::Out;
        return TridentBranch::Body;
    }

    std::vector<Digest> own_children(uint32_t level, uint64_t prefix) {
        if (arb_->phase() == Phase::NarrowP1) return honest_->p1_children(level, prefix);
        return honest_->p2_children(arb_->pinned_op_index(), level, prefix);
    }

    LeafDispute choose_dispute(const VerifierSpec& v) {
        TridentBranch br = *arb_->narrow_branch();
        uint64_t idx = arb_->narrow_leaf_index();
        bool p1 = arb_->phase() == Phase::LeafArbP1;
        if (v.kind == VerifierSpec::Kind::SpuriousResult)
            return p1 ? LeafDispute{LeafDispute::Field::Output, 0} : LeafDispute{LeafDispute::Field::Result, 0};
        if (v.kind == VerifierSpec::Kind::SpuriousOperand)
            return p1 ? LeafDispute{LeafDispute::Field::InputSlot, 0} : LeafDispute{LeafDispute::Field::Operand, 0};
        // honest comparison of the revealed item against this verifier's own
        if (p1) {
            if (br == TridentBranch::In) return {LeafDispute::Field::InItem, 0};
            P1CLeafView leaf = parse_p1c_leaf(arb_->revealed_leaf());
            const auto& cells = arb_->revealed_cells();
            std::vector<Digest> own = br == TridentBranch::Out
                                          ? honest_->trace().records.back().input_digests
                                          : honest_->trace().records.at(idx + 1).input_digests;
            if (br == TridentBranch::Body) {
                P1CLeafView mine = parse_p1c_leaf(honest_->p1_leaf_bytes(br, idx));
                if (leaf.p2s_root != mine.p2s_root) return {LeafDispute::Field::Structure, 0};
            }
            for (size_t s = 0; s < own.size(); ++s) {
                if (s >= cells.size()) return {LeafDispute::Field::InputSlot, s};
                Digest d;
                std::copy(cells[s].begin(), cells[s].end(), d.bytes.begin());
                if (d != own[s]) return {LeafDispute::Field::InputSlot, s};
            }
            if (br == TridentBranch::Out) return {LeafDispute::Field::InputSlot, 0};
            return {LeafDispute::Field::Output, 0};
        }
        if (br == TridentBranch::In) return {LeafDispute::Field::InItem, 0};
        auto& mine_p2 = honest_->p2(arb_->pinned_op_index());
        if (br == TridentBranch::Out) {
            const auto& own_vals = mine_p2.trace.vis.back().operands;
            const auto& cells = arb_->revealed_cells();
            for (size_t e = 0; e < own_vals.size(); ++e) {
                if (e >= cells.size()) return {LeafDispute::Field::OutElement, e};
                if (enc::parse_value_cell(cells[e]) != own_vals[e]) return {LeafDispute::Field::OutElement, e};
            }
            return {LeafDispute::Field::OutElement, 0};
        }
        ViLeafView leaf = parse_vi_leaf(arb_->revealed_leaf());
        const ConcreteVI& mine = mine_p2.trace.vis.at(idx + 1);
        if (leaf.kind_code != static_cast<uint16_t>(mine.kind)) return {LeafDispute::Field::Structure, 0};
        const auto& cells = arb_->revealed_cells();
        for (size_t q = 0; q < mine.operands.size(); ++q) {
            if (q >= cells.size()) return {LeafDispute::Field::Operand, q};
            if (enc::parse_value_cell(cells[q]) != mine.operands[q]) return {LeafDispute::Field::Operand, q};
        }
        return {LeafDispute::Field::Result, 0};
    }

    bool submitter_stalls() const {
        return sub_spec_.kind == SubmitterSpec::Kind::Silent && sent_ >= sub_spec_.misbehave_after;
    }
    bool corrupt_now() const {
        return sub_spec_.kind == SubmitterSpec::Kind::WrongChildren && sent_ >= sub_spec_.misbehave_after;
    }
    bool verifier_stalls(const VerifierSpec& v) const {
        return v.kind == VerifierSpec::Kind::SilentAfterChallenge;
    }

    void stall(Tick& clock, const std::string& caller) {
        clock = arb_->deadline() + 1;
        arb_->timeout(clock, caller);
    }

    const VerifierSpec& spec() const { return ver_specs_.at(static_cast<size_t>(active_)); }
    std::string verifier_name() const { return "verifier" + std::to_string(active_); }

    const TaskSetup* setup_;
    SubmitterSpec sub_spec_;
    std::vector<VerifierSpec> ver_specs_;
    std::unique_ptr<Arbitrator> arb_;
    std::shared_ptr<PartyData> honest_;
    std::unique_ptr<PartyData> submitter_;
    Mirror mirror_;
    int active_ = -1;
    int sent_ = 0;

  public:
    const Arbitrator& arbitrator() const { return *arb_; }
};

// The spec-level entry point: run one dispute configuration to a verdict.
inline SimResult run_dispute_simulation(const TaskSetup& setup, SubmitterSpec sub,
                                        std::vector<VerifierSpec> verifiers,
                                        std::shared_ptr<PartyData> shared_honest = nullptr) {
    DisputeSimulation sim(setup, sub, std::move(verifiers), std::move(shared_honest));
    return sim.run();
}

} // namespace graphpin
