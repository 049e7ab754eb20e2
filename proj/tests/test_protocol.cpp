#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "graphpin/corpus.hpp"
#include "graphpin/simulate.hpp"

using namespace graphpin;

namespace {

TaskSetup setup_for(const CorpusModel& m, uint32_t k = 32) {
    ProtocolParams params;
    params.k = k;
    return build_task_setup(m.graph, m.sample_inputs, params, m.id);
}

SubmitterSpec wrong_result(uint64_t op, uint64_t bop, uint32_t mask = 1) {
    SubmitterSpec s;
    s.kind = SubmitterSpec::Kind::WrongResult;
    s.fault = {true, op, bop, mask};
    return s;
}

} // namespace

TEST_CASE("state machine gate conditions") {
    CorpusModel m = corpus_fig5();
    TaskSetup setup = setup_for(m);
    PartyData honest(setup);
    Arbitrator arb(setup.record, setup.params, {"submitter", "v0", "v1"});
    Claim claim = honest.make_claim("submitter");

    SUBCASE("double claim rejected") {
        CHECK(arb.submit_claim(0, claim).ok);
        CHECK(!arb.submit_claim(1, claim).ok);
    }
    SUBCASE("claim without endorsement rejected") {
        Claim bad = claim;
        bad.p1s_root.bytes[0] ^= 1;
        CHECK(!arb.submit_claim(0, bad).ok);
        bad = claim;
        bad.inputs_commitment.bytes[2] ^= 1;
        CHECK(!arb.submit_claim(0, bad).ok);
        bad = claim;
        bad.model_id = "other";
        CHECK(!arb.submit_claim(0, bad).ok);
    }
    SUBCASE("challenge rules") {
        REQUIRE(arb.submit_claim(0, claim).ok);
        CHECK(!arb.challenge(1, "submitter").ok);   // self-challenge
        CHECK(!arb.challenge(1, "stranger").ok);    // outside the quorum
        CHECK(!arb.challenge(arb.deadline() + 1, "v0").ok); // expired window
        CHECK(arb.challenge(5, "v0").ok);
        CHECK(arb.phase() == Phase::NarrowP1);
        CHECK(!arb.challenge(6, "v1").ok); // dispute already active
    }
    SUBCASE("no-challenge timeout accepts") {
        REQUIRE(arb.submit_claim(0, claim).ok);
        CHECK(!arb.timeout(3, "v0").ok); // too early
        CHECK(arb.timeout(arb.deadline() + 1, "v0").ok);
        REQUIRE(arb.verdict().has_value());
        CHECK(arb.verdict()->outcome == Verdict::Outcome::Accepted);
        CHECK(arb.verdict()->cause == Verdict::Cause::NoChallengeTimeout);
    }
    SUBCASE("out-of-order and wrong-role messages never change state") {
        REQUIRE(arb.submit_claim(0, claim).ok);
        REQUIRE(arb.challenge(5, "v0").ok);
        Phase p = arb.phase();
        size_t tlen = arb.transcript().size();
        CHECK(!arb.select_child(6, "v0", 0).ok);                 // nothing posted yet
        CHECK(!arb.respond_children(6, "v0", {}).ok);            // wrong role
        CHECK(!arb.reveal_leaf(6, "submitter", {}, {}).ok);      // wrong stage
        auto t = honest.p1_trident();
        CHECK(!arb.post_trident(6, "v0", t[0], t[1], t[2]).ok);  // wrong sender
        CHECK(arb.phase() == p);
        CHECK(arb.transcript().size() == tlen);
        // replaying the same trident twice: second is out of order
        CHECK(arb.post_trident(6, "submitter", t[0], t[1], t[2]).ok);
        CHECK(!arb.post_trident(7, "submitter", t[0], t[1], t[2]).ok);
    }
}

TEST_CASE("honest run, no fault: accepted at the claim window") {
    TaskSetup setup = setup_for(corpus_fig5());
    SimResult r = run_dispute_simulation(setup, {}, {{}, {}});
    CHECK(r.verdict.outcome == Verdict::Outcome::Accepted);
    CHECK(r.verdict.cause == Verdict::Cause::NoChallengeTimeout);
    CHECK(r.disputes == 0);
}

TEST_CASE("every single-bop fault in fig5 is pinpointed exactly") {
    CorpusModel m = corpus_fig5();
    TaskSetup setup = setup_for(m);
    for (uint64_t bop = 0; bop < 6; ++bop) {
        SimResult r = run_dispute_simulation(setup, wrong_result(0, bop), {{}});
        REQUIRE(r.verdict.outcome == Verdict::Outcome::Rejected);
        CHECK(r.verdict.cause == Verdict::Cause::BopArbitration);
        REQUIRE(r.verdict.has_pinpoint);
        CHECK(r.verdict.op_index == 0);
        CHECK(r.verdict.bop_index == bop);
    }
}

TEST_CASE("faults in later ops pinpoint the right operation or stay masked") {
    CorpusModel m = corpus_mini_cnn();
    TaskSetup setup = setup_for(m);
    int rejected = 0;
    for (uint64_t op = 0; op < setup.n1(); ++op) {
        uint64_t n2 = setup.circuits[op]->vertices.size();
        for (uint64_t bop : {uint64_t{0}, n2 / 2, n2 - 1}) {
            DisputeSimulation sim(setup, wrong_result(op, bop), {{}});
            bool claim_wrong = sim.submitter_data().claim_digest() != sim.honest_data().claim_digest();
            SimResult r = sim.run();
            if (!claim_wrong) {
                // the flip never reached the output: the claim is correct and stands
                CHECK(r.verdict.outcome == Verdict::Outcome::Accepted);
                continue;
            }
            rejected += 1;
            REQUIRE(r.verdict.outcome == Verdict::Outcome::Rejected);
            CHECK(r.verdict.cause == Verdict::Cause::BopArbitration);
            CHECK(r.verdict.op_index == op);
            CHECK(r.verdict.bop_index == bop);
        }
    }
    CHECK(rejected >= 4); // pooling masks many single-bit flips; some must survive
}

TEST_CASE("narrowing rounds are exactly ceil(log_k n)") {
    CorpusModel m = corpus_chain_1024();
    for (uint32_t k : {2u, 32u}) {
        TaskSetup setup = setup_for(m, k);
        SimResult r = run_dispute_simulation(setup, wrong_result(700, 1), {{}});
        CHECK(r.verdict.outcome == Verdict::Outcome::Rejected);
        CHECK(r.max_p1_rounds == static_cast<int>(tree_depth_for(1024, k)));
        CHECK(r.max_p2_rounds == static_cast<int>(tree_depth_for(4, k)));
    }
}

TEST_CASE("silent submitter strategies time out against the submitter") {
    TaskSetup setup = setup_for(corpus_fig5());
    for (int after : {0, 1, 3, 5}) {
        SubmitterSpec s;
        s.kind = SubmitterSpec::Kind::Silent;
        s.misbehave_after = after;
        // a vigilant verifier keeps the dispute going regardless of the claim
        SimResult r = run_dispute_simulation(setup, s, {{VerifierSpec::Kind::Vigilant}});
        REQUIRE(r.verdict.outcome == Verdict::Outcome::Rejected);
        CHECK(r.verdict.cause == Verdict::Cause::PartyTimeout);
    }
}

TEST_CASE("corrupted children digests reject immediately") {
    TaskSetup setup = setup_for(corpus_fig5());
    SubmitterSpec s;
    s.kind = SubmitterSpec::Kind::WrongChildren;
    s.misbehave_after = 2;
    SimResult r = run_dispute_simulation(setup, s, {{VerifierSpec::Kind::Vigilant}});
    REQUIRE(r.verdict.outcome == Verdict::Outcome::Rejected);
    CHECK(r.verdict.cause == Verdict::Cause::PathVerificationFailure);
}

TEST_CASE("malicious verifier strategies all fail against an honest submitter") {
    TaskSetup setup = setup_for(corpus_mini_cnn());
    for (auto kind : {VerifierSpec::Kind::Vigilant, VerifierSpec::Kind::SpuriousResult,
                      VerifierSpec::Kind::SpuriousOperand, VerifierSpec::Kind::SilentAfterChallenge,
                      VerifierSpec::Kind::WrongSelect}) {
        SimResult r = run_dispute_simulation(setup, {}, {{kind}});
        REQUIRE(r.verdict.outcome == Verdict::Outcome::Accepted);
        CHECK(r.verdict.cause == Verdict::Cause::AllVerifiersFailed);
        CHECK(r.disputes == 1);
    }
}

TEST_CASE("one honest verifier among silent colluders still wins") {
    CorpusModel m = corpus_fig5();
    TaskSetup setup = setup_for(m);
    std::vector<VerifierSpec> vs = {{VerifierSpec::Kind::Silent},
                                    {VerifierSpec::Kind::Silent},
                                    {VerifierSpec::Kind::Honest},
                                    {VerifierSpec::Kind::Silent}};
    SimResult r = run_dispute_simulation(setup, wrong_result(0, 3), vs);
    REQUIRE(r.verdict.outcome == Verdict::Outcome::Rejected);
    CHECK(r.verdict.cause == Verdict::Cause::BopArbitration);
}

TEST_CASE("worst case: m-1 malicious verifiers at the deadline, honest submitter") {
    CorpusModel m = corpus_fig5();
    for (size_t mm : {2u, 4u, 8u}) {
        TaskSetup setup = setup_for(m);
        std::vector<VerifierSpec> vs;
        for (size_t i = 0; i + 1 < mm; ++i) vs.push_back({VerifierSpec::Kind::SpuriousResult, true});
        SimResult r = run_dispute_simulation(setup, {}, vs);
        REQUIRE(r.verdict.outcome == Verdict::Outcome::Accepted);
        CHECK(r.verdict.cause == Verdict::Cause::AllVerifiersFailed);
        CHECK(r.disputes == static_cast<int>(mm - 1));
        // the liveness bound
        uint32_t d1 = tree_depth_for(setup.record.n1, setup.params.k);
        uint32_t d2 = tree_depth_for(std::max<uint64_t>(setup.max_n2, 2), setup.params.k);
        Tick bound = setup.params.t_v +
                     mm * (d1 * setup.params.t_op + d2 * setup.params.t_bop);
        CHECK(r.ticks <= bound);
    }
}

TEST_CASE("claim inconsistent with the committed trace is rejected via the out item") {
    CorpusModel m = corpus_fig5();
    TaskSetup setup = setup_for(m);
    DisputeSimulation sim(setup, {}, {{VerifierSpec::Kind::Honest}});
    // honest trace, lying claim digest
    Claim claim = sim.submitter_data().make_claim("submitter");
    claim.output_digest.bytes[7] ^= 1;
    Arbitrator arb(setup.record, setup.params, {"submitter", "verifier0"});
    REQUIRE(arb.submit_claim(0, claim).ok);
    REQUIRE(arb.challenge(1, "verifier0").ok);
    auto t = sim.submitter_data().p1_trident();
    REQUIRE(arb.post_trident(2, "submitter", t[0], t[1], t[2]).ok);
    // the honest verifier sees the out item contradicting the claim
    Digest expected_out =
        leaf_digest(TreeKind::P1C, encode_p1c_leaf(ViTag::Out, Digest{}, claim.output_digest, Digest{}));
    REQUIRE(t[2] != expected_out);
    REQUIRE(arb.select_trident(3, "verifier0", TridentBranch::Out).ok);
    REQUIRE(arb.reveal_leaf(4, "submitter", sim.submitter_data().p1_leaf_bytes(TridentBranch::Out, 0),
                            sim.submitter_data().p1_reveal_cells(TridentBranch::Out, 0))
                .ok);
    REQUIRE(arb.declare_dispute(5, "verifier0", {LeafDispute::Field::InputSlot, 0}).ok);
    REQUIRE(arb.arbitrate_leaf_p1(6, "submitter",
                                  sim.submitter_data().p1_bundle(TridentBranch::Out, 0,
                                                                 {LeafDispute::Field::InputSlot, 0}))
                .ok);
    REQUIRE(arb.verdict().has_value());
    CHECK(arb.verdict()->outcome == Verdict::Outcome::Rejected);
    CHECK(arb.verdict()->cause == Verdict::Cause::PathVerificationFailure);
}

TEST_CASE("leaf arbitration case vignettes") {
    CorpusModel m = corpus_mini_cnn();
    TaskSetup setup = setup_for(m);

    SUBCASE("structure lie rejected through the symbolic opening") {
        DisputeSimulation sim(setup, {}, {{VerifierSpec::Kind::Vigilant}});
        sim.mutable_submitter().corrupt_record(2, PartyData::RecordField::StructureRoot);
        SimResult r = sim.run();
        REQUIRE(r.verdict.outcome == Verdict::Outcome::Rejected);
        CHECK(r.verdict.cause == Verdict::Cause::PathVerificationFailure);
    }
    SUBCASE("input lie rejected against the producing record") {
        DisputeSimulation sim(setup, {}, {{VerifierSpec::Kind::Vigilant}});
        sim.mutable_submitter().corrupt_record(3, PartyData::RecordField::InputDigest, 0);
        SimResult r = sim.run();
        REQUIRE(r.verdict.outcome == Verdict::Outcome::Rejected);
        CHECK(r.verdict.cause == Verdict::Cause::PathVerificationFailure);
    }
    SUBCASE("output commitment inconsistent with the phase-2 trace is rejected") {
        DisputeSimulation sim(setup, {}, {{VerifierSpec::Kind::Vigilant}});
        sim.mutable_submitter().corrupt_record(4, PartyData::RecordField::OutputDigest);
        SimResult r = sim.run();
        REQUIRE(r.verdict.outcome == Verdict::Outcome::Rejected);
        CHECK(r.verdict.cause == Verdict::Cause::PathVerificationFailure);
    }
    SUBCASE("verifier disputing a correct structure fails") {
        DisputeSimulation sim(setup, {}, {{VerifierSpec::Kind::Vigilant}});
        SimResult r = sim.run();
        CHECK(r.verdict.outcome == Verdict::Outcome::Accepted); // vigilant loses every case
    }
}

TEST_CASE("failed verifier cannot re-challenge; window resumes with remaining time") {
    CorpusModel m = corpus_fig5();
    TaskSetup setup = setup_for(m);
    PartyData honest(setup);
    Arbitrator arb(setup.record, setup.params, {"submitter", "v0", "v1"});
    Claim claim = honest.make_claim("submitter");
    REQUIRE(arb.submit_claim(0, claim).ok);
    Tick first_deadline = arb.deadline();
    REQUIRE(arb.challenge(10, "v0").ok);
    auto t = honest.p1_trident();
    REQUIRE(arb.post_trident(11, "submitter", t[0], t[1], t[2]).ok);
    // v0 goes silent on its select: timeout fails the verifier
    REQUIRE(arb.timeout(arb.deadline() + 1, "submitter").ok);
    CHECK(arb.phase() == Phase::AwaitChallenge);
    CHECK(arb.failed_verifiers().count("v0") == 1);
    CHECK(!arb.challenge(arb.deadline() - 1, "v0").ok); // no second try
    // the resumed window carries the remaining time, not a fresh one
    CHECK(arb.deadline() - (first_deadline - 10) < first_deadline);
    REQUIRE(arb.challenge(arb.deadline(), "v1").ok);
}

TEST_CASE("transcript is well-formed and phase-stamped") {
    TaskSetup setup = setup_for(corpus_fig5());
    SimResult r = run_dispute_simulation(setup, wrong_result(0, 2), {{}});
    REQUIRE(!r.transcript.empty());
    CHECK(r.transcript.front().api == "submit");
    Tick prev = 0;
    for (const auto& e : r.transcript) {
        CHECK(e.tick >= prev);
        prev = e.tick;
    }
    CHECK(r.transcript.back().resulting_phase == Phase::Rejected);
}

TEST_CASE("the arbitrator evaluates at most one basic operation per dispute") {
    CorpusModel m = corpus_mini_mlp();
    TaskSetup setup = setup_for(m);
    DisputeSimulation sim(setup, wrong_result(2, 100, 0x00400001u), {{}});
    SimResult r = sim.run();
    REQUIRE(r.verdict.outcome == Verdict::Outcome::Rejected);
    CHECK(sim.arbitrator().bops_evaluated() == 1);

    DisputeSimulation sim2(setup, {}, {{VerifierSpec::Kind::SilentAfterChallenge}});
    sim2.run();
    CHECK(sim2.arbitrator().bops_evaluated() == 0);
}

TEST_CASE("transcript fuzzing: stale and invalid messages never change state") {
    CorpusModel m = corpus_fig5();
    TaskSetup setup = setup_for(m);
    PartyData honest(setup);
    PartyData faulty(setup, ResultFault{true, 0, 3, 0x00400001u});
    Arbitrator arb(setup.record, setup.params, {"submitter", "verifier0"});
    uint64_t seed = 123;

    // every noise message must be rejected without touching the state
    auto noise = [&](Tick now) {
        Phase p = arb.phase();
        auto ob = arb.obligation();
        size_t tlen = arb.transcript().size();
        auto failed = arb.failed_verifiers();
        for (int i = 0; i < 6; ++i) {
            switch (numerics::splitmix64(seed) % 8) {
                case 0: arb.challenge(now, "stranger"); break; // outside the quorum
                case 1: arb.challenge(now, "submitter"); break;
                case 2: {
                    auto t = faulty.p1_trident();
                    arb.post_trident(now, "verifier0", t[0], t[1], t[2]);
                    break;
                }
                case 3: arb.select_child(now, "verifier0", setup.params.k + 1); break;
                case 4: arb.select_child(now, "submitter", 0); break;
                case 5: arb.respond_children(now, "submitter", {}); break;
                case 6: arb.timeout(now, "verifier0"); break;
                default: arb.declare_dispute(now, "submitter", {LeafDispute::Field::Result, 0}); break;
            }
            // only a legitimate no-challenge timeout may move the machine
            bool legit_timeout = p == Phase::AwaitChallenge && now > arb.deadline();
            if (!legit_timeout) {
                CHECK(arb.phase() == p);
                CHECK(arb.obligation() == ob);
                CHECK(arb.transcript().size() == tlen);
                CHECK(arb.failed_verifiers() == failed);
            }
        }
    };

    REQUIRE(arb.submit_claim(0, faulty.make_claim("submitter")).ok);
    noise(1);
    REQUIRE(arb.challenge(2, "verifier0").ok);
    noise(3);
    auto t = faulty.p1_trident();
    REQUIRE(arb.post_trident(4, "submitter", t[0], t[1], t[2]).ok);
    noise(5);
    REQUIRE(arb.select_trident(6, "verifier0", TridentBranch::Body).ok);
    noise(7);
    auto kids = faulty.p1_children(0, 0);
    REQUIRE(arb.respond_children(8, "submitter", kids).ok);
    // replaying the exact same children is out of order now
    CHECK(!arb.respond_children(9, "submitter", kids).ok);
    noise(9);
    REQUIRE(arb.select_child(10, "verifier0", 0).ok);
    noise(11);
    REQUIRE(arb.reveal_leaf(12, "submitter", faulty.p1_leaf_bytes(TridentBranch::Body, 0),
                            faulty.p1_reveal_cells(TridentBranch::Body, 0))
                .ok);
    noise(13);
    CHECK(arb.phase() == Phase::LeafArbP1);
}

TEST_CASE("corpus total circuit size stays desk-feasible") {
    uint64_t total = 0;
    for (const auto& m : build_corpus()) total += profile_graph(m.graph).bop_before;
    CHECK(total >= 10000);
    CHECK(total <= 10000000);
}

TEST_CASE("in-record lie is resolved against the unanimous commitment") {
    CorpusModel m = corpus_fig5();
    TaskSetup setup = setup_for(m);
    DisputeSimulation sim(setup, {}, {{VerifierSpec::Kind::Vigilant}});
    sim.mutable_submitter().corrupt_in_record_source(1);
    SimResult r = sim.run();
    REQUIRE(r.verdict.outcome == Verdict::Outcome::Rejected);
    CHECK(r.verdict.cause == Verdict::Cause::PathVerificationFailure);
}

TEST_CASE("phase-2 in and out item arbitration with an honest submitter") {
    CorpusModel m = corpus_fig5();
    TaskSetup setup = setup_for(m);
    PartyData honest(setup);

    auto drive_to_phase2 = [&](Arbitrator& arb) {
        REQUIRE(arb.submit_claim(0, honest.make_claim("submitter")).ok);
        REQUIRE(arb.challenge(1, "v0").ok);
        auto t = honest.p1_trident();
        REQUIRE(arb.post_trident(2, "submitter", t[0], t[1], t[2]).ok);
        REQUIRE(arb.select_trident(3, "v0", TridentBranch::Body).ok);
        REQUIRE(arb.respond_children(4, "submitter", honest.p1_children(0, 0)).ok);
        REQUIRE(arb.select_child(5, "v0", 0).ok);
        REQUIRE(arb.reveal_leaf(6, "submitter", honest.p1_leaf_bytes(TridentBranch::Body, 0),
                                honest.p1_reveal_cells(TridentBranch::Body, 0))
                    .ok);
        REQUIRE(arb.declare_dispute(7, "v0", {LeafDispute::Field::Output, 0}).ok);
        REQUIRE(arb.arbitrate_leaf_p1(8, "submitter",
                                      honest.p1_bundle(TridentBranch::Body, 0, {LeafDispute::Field::Output, 0}))
                    .ok);
        REQUIRE(arb.phase() == Phase::NarrowP2);
        auto p2t = honest.p2_trident(0);
        REQUIRE(arb.post_trident(9, "submitter", p2t[0], p2t[1], p2t[2], p2t[3], p2t[4], p2t[5]).ok);
    };

    SUBCASE("in item: rebuilt commitment matches, the verifier fails") {
        Arbitrator arb(setup.record, setup.params, {"submitter", "v0"});
        drive_to_phase2(arb);
        REQUIRE(arb.select_trident(10, "v0", TridentBranch::In).ok);
        REQUIRE(arb.reveal_leaf(11, "submitter", honest.p2_leaf_bytes(0, TridentBranch::In, 0),
                                honest.p2_reveal_cells(0, TridentBranch::In, 0))
                    .ok);
        REQUIRE(arb.declare_dispute(12, "v0", {LeafDispute::Field::InItem, 0}).ok);
        REQUIRE(arb.arbitrate_leaf_p2(13, "submitter",
                                      honest.p2_bundle(0, TridentBranch::In, 0, {LeafDispute::Field::InItem, 0}))
                    .ok);
        CHECK(arb.phase() == Phase::Accepted); // the only verifier failed
        CHECK(arb.verdict()->cause == Verdict::Cause::AllVerifiersFailed);
    }
    SUBCASE("out item: element opening matches its defining item, the verifier fails") {
        Arbitrator arb(setup.record, setup.params, {"submitter", "v0"});
        drive_to_phase2(arb);
        REQUIRE(arb.select_trident(10, "v0", TridentBranch::Out).ok);
        REQUIRE(arb.reveal_leaf(11, "submitter", honest.p2_leaf_bytes(0, TridentBranch::Out, 0),
                                honest.p2_reveal_cells(0, TridentBranch::Out, 0))
                    .ok);
        REQUIRE(arb.declare_dispute(12, "v0", {LeafDispute::Field::OutElement, 1}).ok);
        REQUIRE(arb.arbitrate_leaf_p2(13, "submitter",
                                      honest.p2_bundle(0, TridentBranch::Out, 1,
                                                       {LeafDispute::Field::OutElement, 1}))
                    .ok);
        CHECK(arb.phase() == Phase::Accepted);
    }
}
