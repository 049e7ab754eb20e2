// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Counts and tolerances are pinned here; wall times are printed
// for reference only.

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "graphpin/harness.hpp"

using namespace graphpin;

namespace {

struct Criterion {
    int id;
    std::string name;
    bool pass = true;
    std::string note;
    double seconds = 0.0;
};

std::vector<Criterion> g_results;

void report(int id, const std::string& name, bool pass, const std::string& note, double seconds) {
    g_results.push_back({id, name, pass, note, seconds});
    std::printf("[%s] criterion %d: %s — %s (%.1f s)\n", pass ? "PASS" : "FAIL", id, name.c_str(), note.c_str(),
                seconds);
    std::fflush(stdout);
}

double now_s() { return harness::timing::now_s(); }

// ---- criterion 1: the worked integer matmul ----

void criterion_1() {
    double t0 = now_s();
    bool ok = true;
    std::string note;
    CorpusModel m = corpus_fig5();
    const OpNode& n = m.graph.nodes[0];
    auto circ = CircuitCache::instance().get_or_lower(n, node_input_meta(m.graph, n));
    std::vector<ScalarValue> in;
    for (int i = 1; i <= 6; ++i) in.push_back(ScalarValue::from_i32(i));
    BopTrace tr = eval_circuit(circ, in);
    int32_t want[6] = {5, 12, 15, 24, 17, 39};
    for (int i = 0; i < 6; ++i) ok &= tr.vis[i + 1].result == ScalarValue::from_i32(want[i]);
    auto outs = tr.outputs();
    ok &= outs.size() == 2 && outs[0].as_i32() == 17 && outs[1].as_i32() == 39;
    NativeResult nat = eval_graph_native(m.graph, m.sample_inputs);
    ok &= nat.outputs.at("y").i32(0) == 17 && nat.outputs.at("y").i32(1) == 39;
    note = "intermediates (5,12,15,24), outputs (17,39)";
    report(1, "worked-example ground truth", ok, note, now_s() - t0);
}

// ---- criterion 2: contract vs reference arithmetic ----

void criterion_2(uint64_t random_tuples) {
    double t0 = now_s();
    bool ok = true;
    for (BopKind k : {BopKind::f32_add, BopKind::f32_sub, BopKind::f32_mul, BopKind::f32_div, BopKind::f32_min,
                      BopKind::f32_max})
        ok &= numerics::gen_corner_cases(k).size() >= 7500;
    auto suite = harness::suite_bop_contract(random_tuples);
    ok &= suite.pass();
    char note[160];
    std::snprintf(note, sizeof note, "%" PRIu64 " cases (>=7500 corners per binary f32 bop, %" PRIu64
                                     " random tuples), %" PRIu64 " mismatches",
                  suite.cases, random_tuples, suite.failures);
    report(2, "contract arithmetic bit equality", ok, note, now_s() - t0);
}

// ---- criterion 3: kernels vs circuits per operation kind ----

void criterion_3(int corner, int random) {
    double t0 = now_s();
    auto suite = harness::suite_op_bop(corner, random);
    char note[160];
    std::snprintf(note, sizeof note, "%" PRIu64 " instances (%d corner + %d random per kind), %" PRIu64
                                     " mismatches",
                  suite.cases, corner, random, suite.failures);
    report(3, "kernel vs circuit bit equality", suite.pass(), note, now_s() - t0);
}

// ---- criterion 4: whole-graph digests across thread counts ----

void criterion_4(int batches) {
    double t0 = now_s();
    auto suite = harness::suite_native_op(batches);
    char note[160];
    std::snprintf(note, sizeof note,
                  "%" PRIu64 " digest comparisons (%d batches x corpus x threads {1,2,max}), %" PRIu64 " mismatches",
                  suite.cases, batches, suite.failures);
    report(4, "native vs trace digest equality", suite.pass(), note, now_s() - t0);
}

// ---- criteria 5 and 6: fault sweep, malicious verifiers, liveness ----

struct SweepStats {
    uint64_t trials = 0;
    uint64_t propagated = 0;
    uint64_t masked = 0;
    uint64_t wrong_verdict = 0;
    uint64_t wrong_pinpoint = 0;
    uint64_t round_violations = 0;
    uint64_t bound_violations = 0;
    Tick max_ticks = 0;
};

void sweep_model(const CorpusModel& m, SweepStats& st) {
    ProtocolParams params;
    TaskSetup setup = build_task_setup(m.graph, m.sample_inputs, params, m.id);
    auto honest = std::make_shared<PartyData>(setup);
    uint32_t d1 = tree_depth_for(setup.record.n1, setup.params.k);
    uint32_t d2_max = tree_depth_for(std::max<uint64_t>(setup.max_n2, 2), setup.params.k);
    Tick bound = setup.params.t_v + 2 * (d1 * setup.params.t_op + d2_max * setup.params.t_bop);

    for (uint64_t op = 0; op < setup.n1(); ++op) {
        uint64_t n2 = setup.circuits[op]->vertices.size();
        for (uint64_t bop = 0; bop < n2; ++bop) {
            SubmitterSpec sub;
            sub.kind = SubmitterSpec::Kind::WrongResult;
            sub.fault = {true, op, bop, 0x00400001u};
            DisputeSimulation sim(setup, sub, {{}}, honest);
            bool claim_wrong = sim.submitter_data().claim_digest() != honest->claim_digest();
            SimResult r = sim.run();
            st.trials += 1;
            st.max_ticks = std::max(st.max_ticks, r.ticks);
            if (r.ticks > bound) st.bound_violations += 1;
            if (!claim_wrong) {
                st.masked += 1;
                if (r.verdict.outcome != Verdict::Outcome::Accepted) st.wrong_verdict += 1;
                continue;
            }
            st.propagated += 1;
            if (r.verdict.outcome != Verdict::Outcome::Rejected ||
                r.verdict.cause != Verdict::Cause::BopArbitration) {
                st.wrong_verdict += 1;
                continue;
            }
            if (!r.verdict.has_pinpoint || r.verdict.op_index != op || r.verdict.bop_index != bop)
                st.wrong_pinpoint += 1;
            uint32_t d2 = tree_depth_for(std::max<uint64_t>(n2, 2), setup.params.k);
            if (r.max_p1_rounds != static_cast<int>(d1) || r.max_p2_rounds != static_cast<int>(d2))
                st.round_violations += 1;
        }
    }
}

void criteria_5_and_6() {
    double t0 = now_s();
    SweepStats st;
    sweep_model(corpus_fig5(), st);
    sweep_model(corpus_mini_mlp(), st);

    // honest submitter against every malicious strategy, 100 seeded runs each
    uint64_t honest_runs = 0, honest_failures = 0, honest_bound_violations = 0;
    CorpusModel base = corpus_fig5();
    for (auto kind : {VerifierSpec::Kind::Vigilant, VerifierSpec::Kind::SpuriousResult,
                      VerifierSpec::Kind::SpuriousOperand, VerifierSpec::Kind::SilentAfterChallenge,
                      VerifierSpec::Kind::WrongSelect}) {
        for (uint64_t seed = 0; seed < 100; ++seed) {
            CorpusModel m = base;
            m.sample_inputs["a"] = corpus_detail::seeded_tensor(DType::I32, {2, 2}, seed * 5 + 1);
            m.sample_inputs["b"] = corpus_detail::seeded_tensor(DType::I32, {2, 1}, seed * 5 + 2);
            ProtocolParams params;
            TaskSetup setup = build_task_setup(m.graph, m.sample_inputs, params, m.id);
            SimResult r = run_dispute_simulation(setup, {}, {{kind}});
            honest_runs += 1;
            if (r.verdict.outcome != Verdict::Outcome::Accepted) honest_failures += 1;
            uint32_t d1 = tree_depth_for(setup.record.n1, setup.params.k);
            uint32_t d2 = tree_depth_for(std::max<uint64_t>(setup.max_n2, 2), setup.params.k);
            if (r.ticks > setup.params.t_v + 2 * (d1 * setup.params.t_op + d2 * setup.params.t_bop))
                honest_bound_violations += 1;
        }
    }

    // worst case: m-1 malicious verifiers all challenging at the deadline
    uint64_t worst_failures = 0;
    for (size_t mm : {2u, 4u, 8u}) {
        for (const char* model : {"fig5", "mini-mlp"}) {
            CorpusModel m = corpus_model(model);
            ProtocolParams params;
            TaskSetup setup = build_task_setup(m.graph, m.sample_inputs, params, m.id);
            std::vector<VerifierSpec> vs;
            for (size_t i = 0; i + 1 < mm; ++i) vs.push_back({VerifierSpec::Kind::SpuriousResult, true});
            SimResult r = run_dispute_simulation(setup, {}, vs);
            uint32_t d1 = tree_depth_for(setup.record.n1, setup.params.k);
            uint32_t d2 = tree_depth_for(std::max<uint64_t>(setup.max_n2, 2), setup.params.k);
            Tick bound = setup.params.t_v + mm * (d1 * setup.params.t_op + d2 * setup.params.t_bop);
            bool ok = r.verdict.outcome == Verdict::Outcome::Accepted && r.ticks <= bound &&
                      r.disputes == static_cast<int>(mm - 1);
            if (!ok) worst_failures += 1;
        }
    }

    bool pass5 = st.trials >= 10000 && st.wrong_verdict == 0 && st.wrong_pinpoint == 0 && honest_failures == 0;
    char note5[240];
    std::snprintf(note5, sizeof note5,
                  "%" PRIu64 " injections (%" PRIu64 " propagated -> rejected at the exact (op,bop), %" PRIu64
                  " masked -> accepted), %" PRIu64 "/%" PRIu64 " honest-submitter runs accepted",
                  st.trials, st.propagated, st.masked, honest_runs - honest_failures, honest_runs);
    double dt = now_s() - t0;
    report(5, "correctness under single faults and malicious verifiers", pass5, note5, dt);

    bool pass6 = st.bound_violations == 0 && st.round_violations == 0 && honest_bound_violations == 0 &&
                 worst_failures == 0;
    char note6[240];
    std::snprintf(note6, sizeof note6,
                  "ticks <= T_v + m(d1*T_op + d2*T_bop) in all runs (max %" PRIu64
                  "), rounds/phase exact in %" PRIu64 " narrowed disputes, worst case m in {2,4,8} ok",
                  static_cast<uint64_t>(st.max_ticks), st.propagated);
    report(6, "liveness bound and exact round counts", pass6, note6, 0.0);
}

// ---- criterion 7: branch-size sweep ----

void criterion_7() {
    double t0 = now_s();
    CorpusModel m = corpus_chain_1024();
    auto rows = harness::run_sweep_k(m, {2, 4, 8, 16, 32, 64});
    int expect[6] = {10, 5, 4, 3, 2, 2};
    bool rounds_ok = true;
    for (size_t i = 0; i < rows.size(); ++i) {
        rounds_ok &= rows[i].p1_leaves == 1024;
        rounds_ok &= rows[i].p1_rounds == expect[i];
    }
    bool trend_ok = rows.front().tree_build_ms > rows.back().tree_build_ms;
    std::printf("    k: rounds tree_ms bytes\n");
    for (const auto& r : rows)
        std::printf("    %2u: %d      %.2f    %" PRIu64 "\n", r.k, r.p1_rounds, r.tree_build_ms,
                    r.transcript_bytes);
    char note[200];
    std::snprintf(note, sizeof note, "rounds (%d,%d,%d,%d,%d,%d) == (10,5,4,3,2,2); build time %.2fms @k=2 -> %.2fms @k=64",
                  rows[0].p1_rounds, rows[1].p1_rounds, rows[2].p1_rounds, rows[3].p1_rounds, rows[4].p1_rounds,
                  rows[5].p1_rounds, rows[0].tree_build_ms, rows[5].tree_build_ms);
    report(7, "branch-size sweep on 1024 leaves", rounds_ok && trend_ok, note, now_s() - t0);
}

// ---- criterion 8: two-phase memory contract ----

void criterion_8() {
    double t0 = now_s();
    auto cmp = harness::run_memory_comparison(corpus_mini_cnn());
    // both parties resident: at most the operation trace plus one circuit
    // trace each, never the whole-graph circuit trace
    int64_t two_phase_bound = 2 * static_cast<int64_t>(cmp.n1 + cmp.max_n2) + 128;
    bool ok = cmp.two_phase_peak <= two_phase_bound &&
              cmp.one_phase_peak >= 2 * static_cast<int64_t>(cmp.total_bops) && cmp.ratio() > 1.2;
    char note[240];
    std::snprintf(note, sizeof note,
                  "dispute peak %" PRId64 " items <= 2(n1+max_n2)+128 = %" PRId64 "; one-phase peak %" PRId64
                  " (>= 2x%" PRIu64 " bops); ratio %.2fx",
                  cmp.two_phase_peak, two_phase_bound, cmp.one_phase_peak, cmp.total_bops, cmp.ratio());
    report(8, "two-phase trace footprint", ok, note, now_s() - t0);
}

} // namespace

int main(int argc, char** argv) {
    bool quick = false;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--quick") == 0) quick = true;

    criterion_1();
    criterion_2(quick ? 100000 : 1000000);
    criterion_3(quick ? 5 : 20, quick ? 100 : 1000);
    criterion_4(quick ? 10 : 100);
    if (quick) {
        std::printf("[SKIP] criteria 5-6 fault sweep shortened in --quick mode\n");
        SweepStats st;
        sweep_model(corpus_fig5(), st);
        std::printf("    fig5 sweep: %" PRIu64 " trials, %" PRIu64 " propagated\n", st.trials, st.propagated);
    } else {
        criteria_5_and_6();
    }
    criterion_7();
    criterion_8();

    bool all = true;
    for (const auto& c : g_results) all &= c.pass;
    std::printf("%s\n", all ? "ALL CRITERIA PASSED" : "SOME CRITERIA FAILED");
    return all ? 0 : 1;
}
