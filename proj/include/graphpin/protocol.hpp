#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "graphpin/merkle.hpp"
#include "graphpin/numerics.hpp"

// The arbitrator: a replicated state machine that validates Merkle openings
// and evaluates at most one basic operation per dispute. It trusts only the
// consensus task record (symbolic commitment root, input commitment, sizes)
// and everything else arrives as verified openings.

namespace graphpin {

using Tick = uint64_t;

struct ProtocolParams {
    uint32_t k = 32;
    Tick t_v = 64;   // claim window
    Tick t_op = 16;  // max interaction interval, phase 1
    Tick t_bop = 16; // max interaction interval, phase 2
    bool auto_deadlines = true; // scale the windows with the trace sizes
};

// Unanimously endorsed before any claim: the symbolic phase-1 commitment and
// the input commitment (the concrete in-item of the trace).
struct TaskRecord {
    std::string model_id;
    uint32_t k = 32;
    uint64_t n1 = 0; // interior record count of the phase-1 trees
    Digest p1s_root, p1s_in_digest, p1s_body_root, p1s_out_digest;
    Digest inputs_commitment;
};

struct Claim {
    std::string submitter;
    std::string model_id;
    Digest inputs_commitment;
    Digest p1s_root;
    Digest output_digest;
};

enum class Phase {
    Idle,
    AwaitChallenge,
    NarrowP1,
    LeafArbP1,
    NarrowP2,
    LeafArbP2,
    Accepted,
    Rejected,
};

inline const char* phase_name(Phase p) {
    switch (p) {
        case Phase::Idle: return "idle";
        case Phase::AwaitChallenge: return "await-challenge";
        case Phase::NarrowP1: return "narrow-p1";
        case Phase::LeafArbP1: return "leaf-arb-p1";
        case Phase::NarrowP2: return "narrow-p2";
        case Phase::LeafArbP2: return "leaf-arb-p2";
        case Phase::Accepted: return "accepted";
        case Phase::Rejected: return "rejected";
    }
    return "?";
}

struct Verdict {
    enum class Outcome { Accepted, Rejected } outcome = Outcome::Accepted;
    enum class Cause {
        NoChallengeTimeout,
        AllVerifiersFailed,
        BopArbitration,
        PathVerificationFailure,
        PartyTimeout,
    } cause = Cause::NoChallengeTimeout;
    bool has_pinpoint = false;
    uint64_t op_index = 0;  // interior index in the phase-1 sequence
    uint64_t bop_index = 0; // interior index in the phase-2 sequence
};

inline const char* cause_name(Verdict::Cause c) {
    switch (c) {
        case Verdict::Cause::NoChallengeTimeout: return "no-challenge-timeout";
        case Verdict::Cause::AllVerifiersFailed: return "all-verifiers-failed";
        case Verdict::Cause::BopArbitration: return "bop-arbitration";
        case Verdict::Cause::PathVerificationFailure: return "path-verification-failure";
        case Verdict::Cause::PartyTimeout: return "party-timeout";
    }
    return "?";
}

// Which side owes the next message.
enum class Obligation {
    None,
    VerifierChallenge,
    SubmitterTrident,
    VerifierTridentSelect,
    SubmitterChildren,
    VerifierSelect,
    SubmitterReveal,
    VerifierDeclare,
    SubmitterBundle,
};

enum class TridentBranch : uint8_t { In = 0, Body = 1, Out = 2 };

// Dispute declarations at a pinned leaf.
struct LeafDispute {
    enum class Field {
        Structure, // phase 1: the embedded symbolic-circuit root; phase 2: the bop kind
        InputSlot, // phase 1 interior/out records: one consumed tensor digest
        Output,    // phase 1 interior records: the produced tensor digest
        InItem,    // the in item itself (checked against pinned commitments)
        Operand,   // phase 2: one operand value
        Result,    // phase 2: the committed result
        OutElement // phase 2 out item: one output element
    } field = Field::Result;
    uint64_t index = 0; // slot / operand position / element
};

// ---------------------------------------------------------------------
// Submitter payloads for leaf arbitration. Leaf bytes are always checked
// against the digest pinned by narrowing before any field is used.
// ---------------------------------------------------------------------

struct P1LeafBundle {
    std::vector<uint8_t> leaf; // the submitter's concrete record bytes
    // Structure + Output cases: the consensus symbolic record at this index
    std::vector<uint8_t> p1s_leaf;
    MerklePath p1s_path; // interior only; in/out items verify against the trident digests
    // Output case: the wiring cells of this record (verified against the
    // symbolic record's wiring root), pinned for phase-2 input resolution
    std::vector<std::vector<uint8_t>> wiring_cells;
    // InputSlot case:
    std::vector<uint8_t> producer_leaf; // the producing record's bytes from the submitter's tree
    MerklePath producer_path;           // interior producer only
    MerklePath producer_out_cell;       // producer in-item only: cell under its outputs root
    MerklePath consumed_cell;           // cell `slot` under this record's inputs root
};

// How one phase-2 operand value is proven.
struct OperandProof {
    enum class Source { Interior, TensorInput, Const } source = Source::Interior;
    ScalarValue claimed;       // the value committed in the disputed item
    MerklePath operand_cell;   // cell q under the disputed item's operand root
    // Interior: the defining item in the submitter's concrete tree
    std::vector<uint8_t> defining_leaf;
    MerklePath defining_path;
    // TensorInput: digest-list cell under the pinned inputs commitment, then
    // the element opening under that tensor digest
    MerklePath input_digest_cell;
    MerklePath tensor_elem;
    // Const: cell under the symbolic in-item's operand root
    MerklePath const_cell;
};

struct P2LeafBundle {
    std::vector<uint8_t> leaf; // submitter's concrete item bytes
    std::vector<uint8_t> p2s_leaf;
    MerklePath p2s_path;                             // interior only
    std::vector<std::vector<uint8_t>> p2s_op_cells;  // var cells under the symbolic item's operand root
    std::vector<uint8_t> p2s_in_leaf;                // symbolic in item (consts, arity)
    std::vector<std::vector<uint8_t>> const_cells;   // all const value cells
    std::vector<OperandProof> operands;              // one per operand position needed
    // in-item case: the preimage of the operand commitment
    std::vector<Digest> input_tensor_digests;
    // out-item case: the element dispute
    MerklePath p2s_out_cell; // var cell `e` under the symbolic out item's operand root
    MerklePath out_value_cell; // value cell `e` under the concrete out item's operand root
};

struct TranscriptEntry {
    Tick tick = 0;
    std::string sender;
    std::string api;
    Digest payload_digest;
    Phase resulting_phase = Phase::Idle;
    uint64_t message_bytes = 0;
};

struct CallResult {
    bool ok = true;
    std::string error;
    static CallResult fail(std::string e) { return {false, std::move(e)}; }
};

// ---------------------------------------------------------------------
// Arbitrator
// ---------------------------------------------------------------------

class Arbitrator {
  public:
    Arbitrator(TaskRecord record, ProtocolParams params, std::vector<std::string> quorum)
        : record_(std::move(record)), params_(params), quorum_(std::move(quorum)) {}

    // --- inspection ---
    Phase phase() const { return phase_; }
    const std::optional<Verdict>& verdict() const { return verdict_; }
    const std::optional<Claim>& claim() const { return claim_; }
    const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
    Tick deadline() const { return deadline_; }
    Obligation obligation() const { return obligation_; }
    const std::string& active_verifier() const { return active_verifier_; }
    const std::set<std::string>& failed_verifiers() const { return failed_; }
    int p1_rounds() const { return p1_rounds_; }
    int p2_rounds() const { return p2_rounds_; }
    int bops_evaluated() const { return bops_evaluated_; }
    const std::vector<Digest>& pending_children() const { return pending_children_; }
    uint64_t narrow_leaf_index() const { return leaf_index_; }
    const std::optional<TridentBranch>& narrow_branch() const { return branch_; }
    uint64_t pinned_op_index() const { return p1_leaf_index_; }
    const Digest& pinned_outputs_root() const { return p2_outputs_root_; }
    const Digest& pinned_inputs_root() const { return p2_inputs_root_; }
    const std::vector<uint8_t>& revealed_leaf() const { return revealed_leaf_; }
    const std::vector<std::vector<uint8_t>>& revealed_cells() const { return revealed_cells_; }
    const std::optional<LeafDispute>& dispute() const { return dispute_; }
    std::array<Digest, 3> trident() const { return {trident_in_, trident_body_, trident_out_}; }
    uint32_t narrow_level() const { return level_; }
    uint64_t narrow_prefix() const { return prefix_; }
    const ProtocolParams& params() const { return params_; }

    // --- protocol API ---

    CallResult submit_claim(Tick now, const Claim& c) {
        if (phase_ != Phase::Idle) return CallResult::fail("a claim is already open");
        if (c.model_id != record_.model_id) return CallResult::fail("unknown task");
        if (c.p1s_root != record_.p1s_root || c.inputs_commitment != record_.inputs_commitment)
            return CallResult::fail("claim lacks the unanimous endorsement");
        bool in_quorum = false;
        for (const auto& q : quorum_) in_quorum |= q == c.submitter;
        if (!in_quorum) return CallResult::fail("submitter is not a quorum member");
        claim_ = c;
        phase_ = Phase::AwaitChallenge;
        remaining_tv_ = params_.t_v;
        deadline_ = now + remaining_tv_;
        obligation_ = Obligation::VerifierChallenge;
        log(now, c.submitter, "submit", 128);
        return {};
    }

    CallResult challenge(Tick now, const std::string& verifier) {
        if (phase_ != Phase::AwaitChallenge) return CallResult::fail("no claim open for challenge");
        if (now > deadline_) return CallResult::fail("claim window expired");
        if (verifier == claim_->submitter) return CallResult::fail("the submitter cannot challenge");
        if (failed_.count(verifier)) return CallResult::fail("failed verifier cannot re-challenge");
        bool in_quorum = false;
        for (const auto& q : quorum_) in_quorum |= q == verifier;
        if (!in_quorum) return CallResult::fail("not a quorum member");
        remaining_tv_ = deadline_ - now; // suspend the claim window
        active_verifier_ = verifier;
        p1_rounds_ = 0;
        p2_rounds_ = 0;
        phase_ = Phase::NarrowP1;
        reset_narrowing(record_.n1);
        obligation_ = Obligation::SubmitterTrident;
        deadline_ = now + params_.t_op;
        log(now, verifier, "challenge", 32);
        return {};
    }

    // The submitter commits the concrete tree: its sequence-root preimage.
    CallResult post_trident(Tick now, const std::string& sender, const Digest& in_d, const Digest& body,
                            const Digest& out_d, const Digest& p2s_in = {}, const Digest& p2s_body = {},
                            const Digest& p2s_out = {}) {
        auto gate = expect(now, sender, Obligation::SubmitterTrident);
        if (!gate.ok) return gate;
        if (phase_ == Phase::NarrowP2) {
            // both parties derive the symbolic phase-2 tree; the poster must
            // expose its components so openings can be verified later
            if (sequence_root_digest(TreeKind::P2S, p2s_in, p2s_body, p2s_out) != p2_p2s_root_)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                              "symbolic circuit components do not match the pinned root");
            p2s_in_digest_ = p2s_in;
            p2s_body_root_ = p2s_body;
            p2s_out_digest_ = p2s_out;
        }
        trident_in_ = in_d;
        trident_body_ = body;
        trident_out_ = out_d;
        cursor_ = body;
        obligation_ = Obligation::VerifierTridentSelect;
        deadline_ = now + interaction_window();
        log(now, sender, phase_ == Phase::NarrowP2 ? "post-trident-p2" : "post-trident-p1", 96 * 2);
        return {};
    }

    CallResult select_trident(Tick now, const std::string& sender, TridentBranch br) {
        auto gate = expect(now, sender, Obligation::VerifierTridentSelect);
        if (!gate.ok) return gate;
        branch_ = br;
        if (br == TridentBranch::Body) {
            obligation_ = Obligation::SubmitterChildren;
        } else {
            // the in/out items hang directly under the sequence root
            leaf_digest_pin_ = br == TridentBranch::In ? trident_in_ : trident_out_;
            enter_leaf_arb();
        }
        deadline_ = now + interaction_window();
        log(now, sender, "select-trident", 8);
        return {};
    }

    CallResult respond_children(Tick now, const std::string& sender, const std::vector<Digest>& children) {
        auto gate = expect(now, sender, Obligation::SubmitterChildren);
        if (!gate.ok) return gate;
        if (children.size() != params_.k) return CallResult::fail("expected exactly k child digests");
        TreeKind kind = phase_ == Phase::NarrowP1 ? TreeKind::P1C : TreeKind::P2C;
        if (node_digest(kind, children) != cursor_)
            return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                          "children do not hash to the cursor");
        pending_children_ = children;
        level_ += 1;
        if (phase_ == Phase::NarrowP1) p1_rounds_ += 1;
        if (phase_ == Phase::NarrowP2) p2_rounds_ += 1;
        obligation_ = Obligation::VerifierSelect;
        deadline_ = now + interaction_window();
        log(now, sender, "respond-children", 32ull * params_.k);
        return {};
    }

    CallResult select_child(Tick now, const std::string& sender, uint32_t index) {
        auto gate = expect(now, sender, Obligation::VerifierSelect);
        if (!gate.ok) return gate;
        if (index >= params_.k) return CallResult::fail("child index out of range");
        uint64_t next_prefix = prefix_ * params_.k + index;
        uint32_t depth = tree_depth_for(narrow_n_, params_.k);
        // the subtree must still cover committed leaves
        uint64_t span = 1;
        for (uint32_t l = level_; l < depth; ++l) span *= params_.k;
        if (next_prefix * span >= narrow_n_) return CallResult::fail("selected child is structural padding");
        prefix_ = next_prefix;
        cursor_ = pending_children_[index];
        pending_children_.clear();
        if (level_ == depth) {
            leaf_index_ = prefix_;
            leaf_digest_pin_ = cursor_;
            enter_leaf_arb();
        } else {
            obligation_ = Obligation::SubmitterChildren;
        }
        deadline_ = now + interaction_window();
        log(now, sender, "select-child", 8);
        return {};
    }

    // The submitter opens the pinned item: its bytes plus the cells behind
    // its operand/input commitment, so the verifier can point at a field.
    CallResult reveal_leaf(Tick now, const std::string& sender, const std::vector<uint8_t>& leaf,
                           const std::vector<std::vector<uint8_t>>& cells) {
        auto gate = expect(now, sender, Obligation::SubmitterReveal);
        if (!gate.ok) return gate;
        TreeKind kind = phase_ == Phase::LeafArbP1 ? TreeKind::P1C : TreeKind::P2C;
        if (leaf_digest(kind, leaf) != leaf_digest_pin_)
            return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                          "revealed item does not match the commitment");
        if (phase_ == Phase::LeafArbP1) {
            P1CLeafView v;
            try {
                v = parse_p1c_leaf(leaf);
            } catch (const std::exception&) {
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "malformed item");
            }
            if (v.tag != ViTag::In) {
                std::vector<std::vector<uint8_t>> c32 = cells;
                for (const auto& c : c32)
                    if (c.size() != 32)
                        return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad input cell");
                if (c32.empty() || cells_root(c32, kCellTreeArity, TreeKind::Inputs) != v.inputs_root)
                    return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                                  "input cells do not match the item");
            }
        } else {
            ViLeafView v;
            try {
                v = parse_vi_leaf(leaf);
            } catch (const std::exception&) {
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "malformed item");
            }
            if (v.tag == ViTag::Bop || v.tag == ViTag::Out) {
                bool is_out = v.tag == ViTag::Out;
                TreeKind cell_kind = is_out ? TreeKind::Tensor : TreeKind::Operands;
                uint32_t arity = is_out ? params_.k : kCellTreeArity;
                if (cells.empty() || cells_root(cells, arity, cell_kind) != v.operand_root)
                    return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                                  "operand cells do not match the item");
            }
        }
        revealed_leaf_ = leaf;
        revealed_cells_ = cells;
        obligation_ = Obligation::VerifierDeclare;
        deadline_ = now + interaction_window();
        log(now, sender, "reveal-leaf", leaf.size() + 8ull * cells.size());
        return {};
    }

    CallResult declare_dispute(Tick now, const std::string& sender, const LeafDispute& d) {
        auto gate = expect(now, sender, Obligation::VerifierDeclare);
        if (!gate.ok) return gate;
        dispute_ = d;
        obligation_ = Obligation::SubmitterBundle;
        deadline_ = now + interaction_window();
        log(now, sender, "declare-dispute", 16);
        return {};
    }

    CallResult arbitrate_leaf_p1(Tick now, const std::string& sender, const P1LeafBundle& b);
    CallResult arbitrate_leaf_p2(Tick now, const std::string& sender, const P2LeafBundle& b);

    // Timeout: valid once the deadline passed; resolves against whichever
    // side owed the next message.
    CallResult timeout(Tick now, const std::string& sender) {
        if (phase_ == Phase::Idle || terminal()) return CallResult::fail("nothing to time out");
        if (now <= deadline_) return CallResult::fail("deadline has not passed");
        if (phase_ == Phase::AwaitChallenge) {
            verdict_ = Verdict{Verdict::Outcome::Accepted, Verdict::Cause::NoChallengeTimeout};
            phase_ = Phase::Accepted;
            obligation_ = Obligation::None;
            log(now, sender, "timeout", 8);
            return {};
        }
        bool submitter_owes = obligation_ == Obligation::SubmitterTrident ||
                              obligation_ == Obligation::SubmitterChildren ||
                              obligation_ == Obligation::SubmitterReveal ||
                              obligation_ == Obligation::SubmitterBundle;
        if (submitter_owes) {
            verdict_ = Verdict{Verdict::Outcome::Rejected, Verdict::Cause::PartyTimeout};
            phase_ = Phase::Rejected;
            obligation_ = Obligation::None;
        } else {
            fail_active_verifier(now);
        }
        log(now, sender, "timeout", 8);
        return {};
    }

    bool terminal() const { return phase_ == Phase::Accepted || phase_ == Phase::Rejected; }

    // Verdict when every quorum verifier has failed.
    size_t verifier_count() const { return quorum_.size() - 1; }

  private:
    friend class ArbitratorInspector;

    Tick interaction_window() const {
        return (phase_ == Phase::NarrowP2 || phase_ == Phase::LeafArbP2) ? params_.t_bop : params_.t_op;
    }

    CallResult expect(Tick now, const std::string& sender, Obligation ob) {
        if (terminal() || phase_ == Phase::Idle) return CallResult::fail("dispute is not active");
        if (obligation_ != ob) return CallResult::fail("message out of order");
        bool from_submitter = ob == Obligation::SubmitterTrident || ob == Obligation::SubmitterChildren ||
                              ob == Obligation::SubmitterReveal || ob == Obligation::SubmitterBundle;
        if (from_submitter && sender != claim_->submitter) return CallResult::fail("only the submitter may respond");
        if (!from_submitter && sender != active_verifier_) return CallResult::fail("only the active verifier may act");
        if (now > deadline_) return CallResult::fail("deadline passed; call timeout");
        return {};
    }

    void reset_narrowing(uint64_t n) {
        narrow_n_ = n;
        level_ = 0;
        prefix_ = 0;
        pending_children_.clear();
        branch_.reset();
        leaf_index_ = 0;
    }

    void enter_leaf_arb() {
        phase_ = phase_ == Phase::NarrowP1 ? Phase::LeafArbP1 : Phase::LeafArbP2;
        obligation_ = Obligation::SubmitterReveal;
        revealed_leaf_.clear();
        revealed_cells_.clear();
    }

    CallResult reject(Tick now, const std::string& sender, Verdict::Cause cause, const std::string& why,
                      bool pinpoint = false, uint64_t op = 0, uint64_t bop = 0) {
        (void)why;
        verdict_ = Verdict{Verdict::Outcome::Rejected, cause, pinpoint, op, bop};
        phase_ = Phase::Rejected;
        obligation_ = Obligation::None;
        log(now, sender, std::string("verdict-rejected:") + cause_name(cause), 32);
        return {};
    }

    CallResult verifier_fails(Tick now, const std::string& sender) {
        fail_active_verifier(now);
        log(now, sender, "verifier-failed", 32);
        return {};
    }

    void fail_active_verifier(Tick now) {
        failed_.insert(active_verifier_);
        active_verifier_.clear();
        if (failed_.size() >= verifier_count()) {
            verdict_ = Verdict{Verdict::Outcome::Accepted, Verdict::Cause::AllVerifiersFailed};
            phase_ = Phase::Accepted;
            obligation_ = Obligation::None;
            return;
        }
        phase_ = Phase::AwaitChallenge;
        obligation_ = Obligation::VerifierChallenge;
        deadline_ = now + remaining_tv_; // resume with the remaining window
    }

    void log(Tick tick, const std::string& sender, const std::string& api, uint64_t bytes) {
        TranscriptEntry e;
        e.tick = tick;
        e.sender = sender;
        e.api = api;
        e.payload_digest = keccak256(api + "@" + std::to_string(tick));
        e.resulting_phase = phase_;
        e.message_bytes = bytes;
        transcript_.push_back(std::move(e));
    }

    // --- persistent configuration ---
    TaskRecord record_;
    ProtocolParams params_;
    std::vector<std::string> quorum_;

    // --- mutable state ---
    Phase phase_ = Phase::Idle;
    std::optional<Claim> claim_;
    std::optional<Verdict> verdict_;
    std::vector<TranscriptEntry> transcript_;
    std::set<std::string> failed_;
    std::string active_verifier_;
    Tick deadline_ = 0;
    Tick remaining_tv_ = 0;
    Obligation obligation_ = Obligation::None;

    // narrowing state
    uint64_t narrow_n_ = 0;
    Digest trident_in_, trident_body_, trident_out_;
    std::optional<TridentBranch> branch_;
    Digest cursor_;
    uint32_t level_ = 0;
    uint64_t prefix_ = 0;
    std::vector<Digest> pending_children_;
    uint64_t leaf_index_ = 0;
    Digest leaf_digest_pin_;
    std::optional<LeafDispute> dispute_;
    std::vector<uint8_t> revealed_leaf_;
    std::vector<std::vector<uint8_t>> revealed_cells_;
    int p1_rounds_ = 0;
    int p2_rounds_ = 0;
    int bops_evaluated_ = 0;

    // phase-2 pinned context (from the phase-1 arbitration)
    uint64_t p1_leaf_index_ = 0;         // the disputed operation's interior index
    std::optional<TridentBranch> p1_branch_;
    Digest p2_p2s_root_;                 // consensus symbolic circuit root
    uint64_t p2_n2_ = 0;                 // interior size of the circuit
    Digest p2_inputs_root_;              // the submitter's committed inputs (I_s)
    Digest p2_outputs_root_;             // the submitter's committed output (D_s)
    std::vector<enc::WiringCell> p2_wiring_; // consensus wiring of the disputed record
    Digest p2s_in_digest_, p2s_body_root_, p2s_out_digest_;
};

// ---------------------------------------------------------------------
// Phase-1 leaf arbitration
// ---------------------------------------------------------------------

inline CallResult Arbitrator::arbitrate_leaf_p1(Tick now, const std::string& sender, const P1LeafBundle& b) {
    auto gate = expect(now, sender, Obligation::SubmitterBundle);
    if (!gate.ok) return gate;
    if (phase_ != Phase::LeafArbP1) return CallResult::fail("not in phase-1 leaf arbitration");

    if (b.leaf != revealed_leaf_ || leaf_digest(TreeKind::P1C, b.leaf) != leaf_digest_pin_)
        return reject(now, sender, Verdict::Cause::PathVerificationFailure, "leaf bytes do not match the commitment");
    P1CLeafView leaf;
    try {
        leaf = parse_p1c_leaf(b.leaf);
    } catch (const std::exception&) {
        return reject(now, sender, Verdict::Cause::PathVerificationFailure, "malformed leaf");
    }

    // Establish the consensus symbolic record for this position when needed.
    auto open_p1s = [&](ViTag want_tag) -> std::optional<P1SLeafView> {
        if (branch_ == TridentBranch::In) {
            if (leaf_digest(TreeKind::P1S, b.p1s_leaf) != record_.p1s_in_digest) return std::nullopt;
        } else if (branch_ == TridentBranch::Out) {
            if (leaf_digest(TreeKind::P1S, b.p1s_leaf) != record_.p1s_out_digest) return std::nullopt;
        } else {
            if (b.p1s_path.index != leaf_index_ || b.p1s_path.leaf != b.p1s_leaf) return std::nullopt;
            if (!verify_path(record_.p1s_body_root, b.p1s_path)) return std::nullopt;
        }
        try {
            auto v = parse_p1s_leaf(b.p1s_leaf);
            if (v.tag != want_tag) return std::nullopt;
            return v;
        } catch (const std::exception&) {
            return std::nullopt;
        }
    };

    switch (dispute_->field) {
        case LeafDispute::Field::InItem: {
            // the in item carries the unanimously committed input digests
            if (branch_ != TridentBranch::In)
                return CallResult::fail("in-item dispute requires the in branch");
            if (leaf.tag != ViTag::In || leaf.outputs_root != record_.inputs_commitment)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                              "in item contradicts the unanimous input commitment");
            return verifier_fails(now, sender);
        }
        case LeafDispute::Field::Structure: {
            if (branch_ != TridentBranch::Body) return CallResult::fail("structure disputes target interior records");
            auto s = open_p1s(ViTag::Op);
            if (!s) return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad symbolic opening");
            if (leaf.tag == ViTag::Op && leaf.p2s_root == s->p2s_root) return verifier_fails(now, sender);
            return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                          "committed structure diverges from consensus");
        }
        case LeafDispute::Field::InputSlot: {
            ViTag want = branch_ == TridentBranch::Out ? ViTag::Out : ViTag::Op;
            if (branch_ == TridentBranch::In) return CallResult::fail("the in item consumes nothing");
            if (leaf.tag != want)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "record tag mismatch");
            if (want == ViTag::Out && leaf.inputs_root != claim_->output_digest)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                              "out item contradicts the claimed output");
            auto s = open_p1s(want);
            if (!s) return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad symbolic opening");
            uint64_t slot = dispute_->index;
            if (slot >= s->input_slots) return CallResult::fail("slot out of range");
            // wiring gives the producer of this slot
            if (b.wiring_cells.size() != s->input_slots ||
                cells_root(b.wiring_cells, params_.k, TreeKind::Wiring) != s->wiring_root)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad wiring opening");
            enc::WiringCell w;
            try {
                w = enc::parse_wiring_cell(b.wiring_cells[slot]);
            } catch (const std::exception&) {
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad wiring cell");
            }
            // the consumed digest, from this record's own inputs commitment
            if (b.consumed_cell.index != slot || b.consumed_cell.kind != TreeKind::Inputs ||
                b.consumed_cell.leaf.size() != 32 || !verify_path(leaf.inputs_root, b.consumed_cell))
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad consumed-input opening");
            Digest consumed;
            std::copy(b.consumed_cell.leaf.begin(), b.consumed_cell.leaf.end(), consumed.bytes.begin());

            // the produced digest, from the producing record in the same tree
            Digest produced;
            if (w.producer_record == 0) {
                if (leaf_digest(TreeKind::P1C, b.producer_leaf) != trident_in_)
                    return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad producer opening");
                P1CLeafView prod = parse_p1c_leaf(b.producer_leaf);
                if (prod.tag != ViTag::In)
                    return reject(now, sender, Verdict::Cause::PathVerificationFailure, "producer tag mismatch");
                if (b.producer_out_cell.index != w.producer_slot || b.producer_out_cell.leaf.size() != 32 ||
                    !verify_path(prod.outputs_root, b.producer_out_cell))
                    return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad source-cell opening");
                std::copy(b.producer_out_cell.leaf.begin(), b.producer_out_cell.leaf.end(), produced.bytes.begin());
            } else {
                if (b.producer_path.index != w.producer_record - 1 || b.producer_path.leaf != b.producer_leaf ||
                    !verify_path(trident_body_, b.producer_path))
                    return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad producer opening");
                P1CLeafView prod = parse_p1c_leaf(b.producer_leaf);
                if (prod.tag != ViTag::Op || w.producer_slot != 0)
                    return reject(now, sender, Verdict::Cause::PathVerificationFailure, "producer tag mismatch");
                produced = prod.outputs_root;
            }
            if (produced == consumed) return verifier_fails(now, sender);
            return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                          "consumed input diverges from the producing record");
        }
        case LeafDispute::Field::Output: {
            if (branch_ != TridentBranch::Body) return CallResult::fail("output disputes target interior records");
            if (leaf.tag != ViTag::Op)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "record tag mismatch");
            auto s = open_p1s(ViTag::Op);
            if (!s) return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad symbolic opening");
            if (b.wiring_cells.size() != s->input_slots ||
                cells_root(b.wiring_cells, params_.k, TreeKind::Wiring) != s->wiring_root)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad wiring opening");
            // move to phase 2 over this operation's circuit
            p1_leaf_index_ = leaf_index_;
            p1_branch_ = branch_;
            p2_p2s_root_ = s->p2s_root;
            p2_n2_ = s->interior_size;
            p2_inputs_root_ = leaf.inputs_root;
            p2_outputs_root_ = leaf.outputs_root;
            p2_wiring_.clear();
            for (const auto& cell : b.wiring_cells) p2_wiring_.push_back(enc::parse_wiring_cell(cell));
            phase_ = Phase::NarrowP2;
            reset_narrowing(p2_n2_);
            obligation_ = Obligation::SubmitterTrident;
            deadline_ = now + params_.t_bop;
            log(now, sender, "enter-phase2", 256);
            return {};
        }
        default:
            return CallResult::fail("dispute field does not apply to phase 1");
    }
}

// ---------------------------------------------------------------------
// Phase-2 leaf arbitration
// ---------------------------------------------------------------------

inline CallResult Arbitrator::arbitrate_leaf_p2(Tick now, const std::string& sender, const P2LeafBundle& b) {
    auto gate = expect(now, sender, Obligation::SubmitterBundle);
    if (!gate.ok) return gate;
    if (phase_ != Phase::LeafArbP2) return CallResult::fail("not in phase-2 leaf arbitration");

    if (b.leaf != revealed_leaf_ || leaf_digest(TreeKind::P2C, b.leaf) != leaf_digest_pin_)
        return reject(now, sender, Verdict::Cause::PathVerificationFailure, "leaf bytes do not match the commitment");
    ViLeafView leaf;
    try {
        leaf = parse_vi_leaf(b.leaf);
    } catch (const std::exception&) {
        return reject(now, sender, Verdict::Cause::PathVerificationFailure, "malformed leaf");
    }

    auto open_p2s = [&](ViTag want_tag) -> std::optional<ViLeafView> {
        if (branch_ == TridentBranch::In) {
            if (leaf_digest(TreeKind::P2S, b.p2s_leaf) != p2s_in_digest_) return std::nullopt;
        } else if (branch_ == TridentBranch::Out) {
            if (leaf_digest(TreeKind::P2S, b.p2s_leaf) != p2s_out_digest_) return std::nullopt;
        } else {
            if (b.p2s_path.index != leaf_index_ || b.p2s_path.leaf != b.p2s_leaf) return std::nullopt;
            if (!verify_path(p2s_body_root_, b.p2s_path)) return std::nullopt;
        }
        try {
            auto v = parse_vi_leaf(b.p2s_leaf);
            if (v.tag != want_tag) return std::nullopt;
            return v;
        } catch (const std::exception&) {
            return std::nullopt;
        }
    };

    // Parse the symbolic in item to learn arity and constants when needed.
    auto open_p2s_in = [&]() -> std::optional<ViLeafView> {
        if (leaf_digest(TreeKind::P2S, b.p2s_in_leaf) != p2s_in_digest_) return std::nullopt;
        try {
            auto v = parse_vi_leaf(b.p2s_in_leaf);
            if (v.tag != ViTag::In) return std::nullopt;
            return v;
        } catch (const std::exception&) {
            return std::nullopt;
        }
    };

    uint64_t n_inputs = 0;
    for (const auto& w : p2_wiring_) n_inputs += w.elem_count;

    // Resolve one proven operand value for variable id `var`.
    auto prove_operand = [&](const OperandProof& p, Var var, uint32_t base) -> std::optional<ScalarValue> {
        if (var >= base) {
            // defined by an earlier interior item of the same concrete tree
            uint64_t def_pos = var - base; // interior index
            if (p.source != OperandProof::Source::Interior) return std::nullopt;
            if (p.defining_path.index != def_pos || p.defining_path.leaf != p.defining_leaf) return std::nullopt;
            if (!verify_path(trident_body_, p.defining_path)) return std::nullopt;
            ViLeafView def = parse_vi_leaf(p.defining_leaf);
            if (def.tag != ViTag::Bop || def.result_tag > 2) return std::nullopt;
            return ScalarValue{static_cast<DType>(def.result_tag), def.result_payload};
        }
        if (var < n_inputs) {
            if (p.source != OperandProof::Source::TensorInput) return std::nullopt;
            // locate the slot and element through the consensus wiring
            uint64_t x = var;
            size_t slot = 0;
            while (slot < p2_wiring_.size() && x >= p2_wiring_[slot].elem_count) {
                x -= p2_wiring_[slot].elem_count;
                slot += 1;
            }
            if (slot >= p2_wiring_.size()) return std::nullopt;
            if (p.input_digest_cell.index != slot || p.input_digest_cell.leaf.size() != 32) return std::nullopt;
            if (!verify_path(p2_inputs_root_, p.input_digest_cell)) return std::nullopt;
            Digest tensor_root;
            std::copy(p.input_digest_cell.leaf.begin(), p.input_digest_cell.leaf.end(), tensor_root.bytes.begin());
            if (p.tensor_elem.index != x || p.tensor_elem.kind != TreeKind::Tensor) return std::nullopt;
            if (!verify_path(tensor_root, p.tensor_elem)) return std::nullopt;
            return enc::parse_value_cell(p.tensor_elem.leaf);
        }
        // a structural constant, committed in the symbolic in item
        if (p.source != OperandProof::Source::Const) return std::nullopt;
        auto in_s = open_p2s_in();
        if (!in_s) return std::nullopt;
        uint64_t j = var - n_inputs;
        if (p.const_cell.index != j || p.const_cell.kind != TreeKind::Operands) return std::nullopt;
        if (!verify_path(in_s->operand_root, p.const_cell)) return std::nullopt;
        return enc::parse_value_cell(p.const_cell.leaf);
    };

    switch (dispute_->field) {
        case LeafDispute::Field::InItem: {
            if (branch_ != TridentBranch::In) return CallResult::fail("in-item dispute requires the in branch");
            if (leaf.tag != ViTag::In)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "item tag mismatch");
            // rebuild the expected operand commitment from the pinned phase-1
            // inputs and the consensus constants
            if (digest_list_root(b.input_tensor_digests) != p2_inputs_root_)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                              "input digests do not match the pinned commitment");
            auto in_s = open_p2s_in();
            if (!in_s) return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad symbolic in item");
            std::vector<ScalarValue> consts;
            for (const auto& cell : b.const_cells) consts.push_back(enc::parse_value_cell(cell));
            if (!b.const_cells.empty() || in_s->result_payload > n_inputs) {
                std::vector<std::vector<uint8_t>> cells = b.const_cells;
                if (cells.empty()) cells.push_back(enc::value_cell(ScalarValue{}));
                if (cells_root(cells, kCellTreeArity, TreeKind::Operands) != in_s->operand_root)
                    return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad constant opening");
            }
            if (in_s->result_payload != n_inputs + consts.size())
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "arity mismatch");
            Digest expect_root = operand_tree_concrete_in(b.input_tensor_digests, consts, params_.k).root;
            if (leaf.operand_root == expect_root) return verifier_fails(now, sender);
            return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                          "in item contradicts the pinned inputs");
        }
        case LeafDispute::Field::Structure: {
            if (branch_ != TridentBranch::Body)
                return CallResult::fail("structure disputes target interior items");
            auto s = open_p2s(ViTag::Bop);
            if (!s) return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad symbolic opening");
            if (leaf.tag == ViTag::Bop && leaf.kind_code == s->kind_code) return verifier_fails(now, sender);
            return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                          "committed kind diverges from the symbolic circuit");
        }
        case LeafDispute::Field::Operand:
        case LeafDispute::Field::Result: {
            if (branch_ != TridentBranch::Body)
                return CallResult::fail("operand and result disputes target interior items");
            auto s = open_p2s(ViTag::Bop);
            if (!s) return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad symbolic opening");
            if (leaf.tag != ViTag::Bop || leaf.kind_code != s->kind_code)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                              "committed kind diverges from the symbolic circuit");
            BopKind kind = static_cast<BopKind>(s->kind_code);
            if (s->kind_code >= kBopKindCount)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "unknown kind");
            size_t arity = static_cast<size_t>(bop_arity(kind));
            // symbolic operand variables
            if (b.p2s_op_cells.size() != arity ||
                cells_root(b.p2s_op_cells, kCellTreeArity, TreeKind::Operands) != s->operand_root)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad symbolic operand opening");
            auto in_s = open_p2s_in();
            if (!in_s) return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad symbolic in item");
            uint32_t base = in_s->result_payload; // inputs + constants
            if (b.operands.size() != arity)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "operand proofs missing");
            std::vector<ScalarValue> proven(arity);
            for (size_t q = 0; q < arity; ++q) {
                auto cell = b.p2s_op_cells[q];
                if (cell.size() != 8 || cell[0] != kResultTagVar)
                    return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad var cell");
                Var var = enc::parse_value_cell(cell).bits;
                const OperandProof& p = b.operands[q];
                // the committed operand value inside the disputed item
                if (p.operand_cell.index != q || p.operand_cell.kind != TreeKind::Operands ||
                    !verify_path(leaf.operand_root, p.operand_cell))
                    return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad operand-cell opening");
                ScalarValue committed = enc::parse_value_cell(p.operand_cell.leaf);
                if (committed != p.claimed)
                    return reject(now, sender, Verdict::Cause::PathVerificationFailure, "operand claim mismatch");
                auto true_val = prove_operand(p, var, base);
                if (!true_val)
                    return reject(now, sender, Verdict::Cause::PathVerificationFailure, "operand source unproven");
                if (*true_val != committed)
                    return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                                  "committed operand diverges from its source");
                proven[q] = *true_val;
            }
            if (dispute_->field == LeafDispute::Field::Operand) return verifier_fails(now, sender);
            // the one basic operation this dispute reduces to
            bops_evaluated_ += 1;
            ScalarValue expected = arity == 2 ? numerics::eval_bop_contract_scalar(kind, proven[0], proven[1])
                                              : numerics::eval_bop_contract_scalar(kind, proven[0]);
            ScalarValue committed_result{static_cast<DType>(leaf.result_tag), leaf.result_payload};
            if (leaf.result_tag > 2 || committed_result != expected)
                return reject(now, sender, Verdict::Cause::BopArbitration, "result refuted", true, p1_leaf_index_,
                              leaf_index_);
            return verifier_fails(now, sender);
        }
        case LeafDispute::Field::OutElement: {
            if (branch_ != TridentBranch::Out) return CallResult::fail("element disputes target the out item");
            if (leaf.tag != ViTag::Out)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "item tag mismatch");
            if (leaf.operand_root != p2_outputs_root_)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                              "out item contradicts the committed output digest");
            auto s = open_p2s(ViTag::Out);
            if (!s) return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad symbolic opening");
            uint64_t e = dispute_->index;
            // which variable feeds output element e
            if (b.p2s_out_cell.index != e || b.p2s_out_cell.kind != TreeKind::Operands ||
                b.p2s_out_cell.leaf.size() != 8 || b.p2s_out_cell.leaf[0] != kResultTagVar ||
                !verify_path(s->operand_root, b.p2s_out_cell))
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad output-var opening");
            Var var = enc::parse_value_cell(b.p2s_out_cell.leaf).bits;
            auto in_s = open_p2s_in();
            if (!in_s) return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad symbolic in item");
            uint32_t base = in_s->result_payload;
            if (b.operands.size() != 1)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "operand proof missing");
            auto true_val = prove_operand(b.operands[0], var, base);
            if (!true_val)
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "operand source unproven");
            // the committed output element
            if (b.out_value_cell.index != e || b.out_value_cell.kind != TreeKind::Tensor ||
                !verify_path(leaf.operand_root, b.out_value_cell))
                return reject(now, sender, Verdict::Cause::PathVerificationFailure, "bad element opening");
            ScalarValue committed = enc::parse_value_cell(b.out_value_cell.leaf);
            if (committed == *true_val) return verifier_fails(now, sender);
            return reject(now, sender, Verdict::Cause::PathVerificationFailure,
                          "output element diverges from its defining item");
        }
        default:
            return CallResult::fail("dispute field does not apply to phase 2");
    }
}

} // namespace graphpin
