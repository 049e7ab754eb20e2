// Command-line front end: lowering dumps, evaluation, commitments, dispute
// simulation, profiling, the branch-size sweep, corner-case export and the
// consistency suites. Exit status is nonzero iff an acceptance-bearing
// suite reports failures or a dispute reaches an unexpected verdict.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphpin/harness.hpp"
#include "graphpin/model_io.hpp"

using namespace graphpin;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void write_output(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + out + " for writing");
    f << text;
}

struct LoadedModel {
    std::string id;
    Graph graph;
    std::map<std::string, Tensor> sample_inputs;
};

LoadedModel resolve_model(const std::string& spec) {
    if (is_corpus_model(spec)) {
        CorpusModel m = corpus_model(spec);
        return {m.id, std::move(m.graph), std::move(m.sample_inputs)};
    }
    LoadedModel lm;
    lm.id = spec;
    lm.graph = load_model(read_file(spec));
    return lm;
}

std::map<std::string, Tensor> resolve_inputs(const LoadedModel& m, const std::string& spec, uint64_t seed) {
    if (spec.empty() || spec == "sample") {
        if (!m.sample_inputs.empty()) return m.sample_inputs;
        std::map<std::string, Tensor> in;
        for (const auto& name : m.graph.graph_inputs) {
            const auto& meta = m.graph.edges.at(name);
            in[name] = corpus_detail::seeded_tensor(meta.dtype, meta.shape, seed ^ 0x9E37ull);
        }
        return in;
    }
    return load_inputs(read_file(spec));
}

SubmitterSpec parse_fault(const std::string& s) {
    SubmitterSpec spec;
    if (s.empty() || s == "none") return spec;
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(tok);
    if (parts[0] == "wrong-result") {
        if (parts.size() < 3) throw std::runtime_error("wrong-result needs :OP:BOP[:MASK]");
        spec.kind = SubmitterSpec::Kind::WrongResult;
        spec.fault.active = true;
        spec.fault.op_interior = std::stoull(parts[1]);
        spec.fault.bop_interior = std::stoull(parts[2]);
        spec.fault.xor_mask = parts.size() > 3 ? static_cast<uint32_t>(std::stoul(parts[3], nullptr, 0)) : 1;
    } else if (parts[0] == "silent") {
        spec.kind = SubmitterSpec::Kind::Silent;
        spec.misbehave_after = parts.size() > 1 ? std::stoi(parts[1]) : 0;
    } else if (parts[0] == "wrong-children") {
        spec.kind = SubmitterSpec::Kind::WrongChildren;
        spec.misbehave_after = parts.size() > 1 ? std::stoi(parts[1]) : 0;
    } else {
        throw std::runtime_error("unknown fault spec: " + parts[0]);
    }
    return spec;
}

VerifierSpec parse_verifier(std::string s) {
    VerifierSpec v;
    auto at = s.find("@deadline");
    if (at != std::string::npos) {
        v.challenge_at_deadline = true;
        s = s.substr(0, at);
    }
    if (s == "honest") {
        v.kind = VerifierSpec::Kind::Honest;
    } else if (s == "vigilant") {
        v.kind = VerifierSpec::Kind::Vigilant;
    } else if (s == "silent") {
        v.kind = VerifierSpec::Kind::Silent;
    } else if (s == "spurious-result") {
        v.kind = VerifierSpec::Kind::SpuriousResult;
    } else if (s == "spurious-operand") {
        v.kind = VerifierSpec::Kind::SpuriousOperand;
    } else if (s == "silent-after-challenge") {
        v.kind = VerifierSpec::Kind::SilentAfterChallenge;
    } else if (s == "wrong-select") {
        v.kind = VerifierSpec::Kind::WrongSelect;
    } else {
        throw std::runtime_error("unknown verifier strategy: " + s);
    }
    return v;
}

std::string hex_of(uint32_t v) {
    char buf[12];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"verifiable computation-graph toolkit"};
    app.require_subcommand(1);

    std::string model_spec, inputs_spec, out_path, node_id, fault_spec = "none", verifiers_spec, kind_spec;
    uint64_t seed = 1;
    uint32_t k = 32;
    int quorum = 2;

    auto add_common = [&](CLI::App* cmd, bool needs_model) {
        if (needs_model) cmd->add_option("--model", model_spec, "corpus model id or model file path")->required();
        cmd->add_option("--out", out_path, "output file (default stdout)");
        cmd->add_option("--seed", seed, "seed for generated data");
        cmd->add_option("--k", k, "Merkle branch factor");
    };

    auto* lower_cmd = app.add_subcommand("lower", "dump one operation's circuit");
    add_common(lower_cmd, true);
    lower_cmd->add_option("--node", node_id, "node id")->required();

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a model");
    add_common(eval_cmd, true);
    eval_cmd->add_option("--inputs", inputs_spec, "inputs file, or 'sample'");
    std::string trace_mode;
    eval_cmd->add_option("--trace", trace_mode, "op | bop (bop needs --node)");
    eval_cmd->add_option("--node", node_id, "node id for --trace bop");

    auto* commit_cmd = app.add_subcommand("commit", "compute the commitment roots");
    add_common(commit_cmd, true);
    commit_cmd->add_option("--inputs", inputs_spec, "inputs file, or 'sample'");

    auto* dispute_cmd = app.add_subcommand("dispute", "run one dispute simulation");
    add_common(dispute_cmd, true);
    dispute_cmd->add_option("--inputs", inputs_spec, "inputs file, or 'sample'");
    dispute_cmd->add_option("--quorum", quorum, "quorum size m (submitter + m-1 verifiers)");
    dispute_cmd->add_option("--fault", fault_spec, "none | wrong-result:OP:BOP[:MASK] | silent[:N] | wrong-children[:N]");
    dispute_cmd->add_option("--verifiers", verifiers_spec, "comma list of verifier strategies");

    auto* profile_cmd = app.add_subcommand("profile", "per-operation circuit statistics");
    add_common(profile_cmd, true);

    auto* sweep_cmd = app.add_subcommand("sweep-k", "branch-size sweep");
    add_common(sweep_cmd, true);

    auto* corners_cmd = app.add_subcommand("corners", "export the corner-case suite of one bop");
    corners_cmd->add_option("--kind", kind_spec, "bop kind, e.g. f32_add")->required();
    corners_cmd->add_option("--out", out_path, "output file (default stdout)");

    auto* consistency_cmd = app.add_subcommand("consistency", "run the three consistency suites");
    consistency_cmd->add_option("--out", out_path, "machine-readable report file");
    uint64_t random_tuples = 1000000;
    int op_corner = 20, op_random = 1000, batches = 100;
    consistency_cmd->add_option("--random-tuples", random_tuples);
    consistency_cmd->add_option("--op-corner", op_corner);
    consistency_cmd->add_option("--op-random", op_random);
    consistency_cmd->add_option("--batches", batches);

    auto* corpus_cmd = app.add_subcommand("corpus", "write the bundled models to a directory");
    corpus_cmd->add_option("--out", out_path, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*lower_cmd) {
            LoadedModel m = resolve_model(model_spec);
            const OpNode* n = m.graph.find_node(node_id);
            if (!n) throw std::runtime_error("no node named " + node_id);
            Circuit c = lower_op(*n, node_input_meta(m.graph, *n));
            write_output(out_path, circuit_dump(c));
        } else if (*eval_cmd) {
            LoadedModel m = resolve_model(model_spec);
            auto inputs = resolve_inputs(m, inputs_spec, seed);
            if (trace_mode == "bop") {
                if (node_id.empty()) throw std::runtime_error("--trace bop needs --node");
                OpTrace tr = eval_graph_ops(m.graph, inputs, k);
                auto order = topo_order_ops(m.graph);
                size_t idx = SIZE_MAX;
                for (size_t i = 0; i < order.size(); ++i)
                    if (order[i] == node_id) idx = i;
                if (idx == SIZE_MAX) throw std::runtime_error("no node named " + node_id);
                const OpNode* n = m.graph.find_node(node_id);
                auto circ = CircuitCache::instance().get_or_lower(*n, node_input_meta(m.graph, *n));
                auto flat = op_circuit_inputs(m.graph, inputs, tr, idx + 1);
                BopTrace btr = eval_circuit(circ, flat);
                std::ostringstream os;
                os << "node " << node_id << " items " << btr.vis.size() << "\n";
                for (const auto& vi : btr.vis) {
                    os << vi.position << " ";
                    if (vi.tag == ViTag::In) {
                        os << "in";
                        for (const auto& v : vi.operands) os << " " << hex_of(v.bits);
                    } else if (vi.tag == ViTag::Out) {
                        os << "out";
                        for (const auto& v : vi.operands) os << " " << hex_of(v.bits);
                    } else {
                        os << bop_name(vi.kind);
                        for (const auto& v : vi.operands) os << " " << hex_of(v.bits);
                        os << " -> " << hex_of(vi.result.bits);
                    }
                    os << "\n";
                }
                write_output(out_path, os.str());
            } else if (trace_mode == "op") {
                OpTrace tr = eval_graph_ops(m.graph, inputs, k);
                nlohmann::json recs = nlohmann::json::array();
                for (const auto& rec : tr.records) {
                    nlohmann::json jr;
                    jr["tag"] = rec.tag == ViTag::In ? "in" : rec.tag == ViTag::Out ? "out" : "op";
                    if (rec.tag == ViTag::Op) {
                        jr["node"] = rec.node_id;
                        jr["symbolic_root"] = rec.p2s_root.hex();
                        jr["output_digest"] = rec.output_digests[0].hex();
                    }
                    nlohmann::json ins = nlohmann::json::array();
                    for (const auto& d : rec.input_digests) ins.push_back(d.hex());
                    jr["input_digests"] = ins;
                    recs.push_back(jr);
                }
                nlohmann::json doc = {{"records", recs}, {"result_digest", tr.result_digest.hex()}};
                write_output(out_path, doc.dump(2) + "\n");
            } else {
                NativeResult r = eval_graph_native(m.graph, inputs, k);
                std::map<std::string, Tensor> outs(r.outputs.begin(), r.outputs.end());
                nlohmann::json doc;
                doc["result_digest"] = r.result_digest.hex();
                doc["outputs"] = nlohmann::json::parse(save_inputs(outs));
                write_output(out_path, doc.dump(2) + "\n");
            }
        } else if (*commit_cmd) {
            LoadedModel m = resolve_model(model_spec);
            auto inputs = resolve_inputs(m, inputs_spec, seed);
            ProtocolParams params;
            params.k = k;
            TaskSetup setup = build_task_setup(m.graph, inputs, params, m.id);
            PartyData party(setup);
            nlohmann::json doc;
            doc["k"] = k;
            doc["n1"] = setup.record.n1;
            doc["p1_symbolic_root"] = setup.record.p1s_root.hex();
            doc["inputs_commitment"] = setup.record.inputs_commitment.hex();
            doc["p1_concrete_root"] = party.p1c().root.hex();
            doc["claim_output_digest"] = party.claim_digest().hex();
            write_output(out_path, doc.dump(2) + "\n");
        } else if (*dispute_cmd) {
            LoadedModel m = resolve_model(model_spec);
            auto inputs = resolve_inputs(m, inputs_spec, seed);
            ProtocolParams params;
            params.k = k;
            TaskSetup setup = build_task_setup(m.graph, inputs, params, m.id);
            SubmitterSpec sub = parse_fault(fault_spec);
            std::vector<VerifierSpec> vs;
            if (!verifiers_spec.empty()) {
                std::stringstream ss(verifiers_spec);
                std::string tok;
                while (std::getline(ss, tok, ',')) vs.push_back(parse_verifier(tok));
            } else {
                for (int i = 0; i + 1 < quorum; ++i) vs.push_back({});
            }
            if (vs.empty()) throw std::runtime_error("a quorum needs at least one verifier");
            SimResult r = run_dispute_simulation(setup, sub, vs);
            std::ostringstream os;
            for (const auto& e : r.transcript)
                os << e.tick << " " << e.sender << " " << e.api << " " << e.payload_digest.hex().substr(0, 16)
                   << " -> " << phase_name(e.resulting_phase) << "\n";
            os << "verdict: " << (r.verdict.outcome == Verdict::Outcome::Accepted ? "accepted" : "rejected")
               << " (" << cause_name(r.verdict.cause) << ")";
            if (r.verdict.has_pinpoint)
                os << " pinpoint op=" << r.verdict.op_index << " bop=" << r.verdict.bop_index;
            os << "\nticks: " << r.ticks << " p1_rounds: " << r.max_p1_rounds << " p2_rounds: " << r.max_p2_rounds
               << " bytes: " << r.message_bytes << "\n";
            write_output(out_path, os.str());
            // a dispute run "fails" when the verdict contradicts the setup
            bool claim_wrong = sub.kind != SubmitterSpec::Kind::Honest;
            bool rejected = r.verdict.outcome == Verdict::Outcome::Rejected;
            if (sub.kind == SubmitterSpec::Kind::WrongResult) {
                DisputeSimulation probe(setup, sub, vs);
                claim_wrong = probe.submitter_data().claim_digest() != probe.honest_data().claim_digest();
            }
            bool has_honest = false;
            for (const auto& v : vs)
                has_honest |= v.kind == VerifierSpec::Kind::Honest || v.kind == VerifierSpec::Kind::Vigilant;
            if (claim_wrong && has_honest && !rejected) return 1;
            if (!claim_wrong && rejected) return 1;
        } else if (*profile_cmd) {
            LoadedModel m = resolve_model(model_spec);
            GraphProfile p = profile_graph(m.graph);
            if (!out_path.empty() && out_path != "-") {
                write_output(out_path, harness::profile_to_json(p).dump(2) + "\n");
                std::cout << harness::profile_to_text(p);
            } else {
                write_output(out_path, harness::profile_to_text(p));
            }
        } else if (*sweep_cmd) {
            LoadedModel lm = resolve_model(model_spec);
            CorpusModel cm{lm.id, lm.graph, resolve_inputs(lm, inputs_spec, seed)};
            auto rows = harness::run_sweep_k(cm, {2, 4, 8, 16, 32, 64});
            if (!out_path.empty() && out_path != "-") {
                write_output(out_path, harness::sweep_to_json(rows).dump(2) + "\n");
                std::cout << harness::sweep_to_text(rows);
            } else {
                write_output(out_path, harness::sweep_to_text(rows));
            }
        } else if (*corners_cmd) {
            BopKind kind = bop_from_name(kind_spec);
            auto cases = numerics::gen_corner_cases(kind);
            std::ostringstream os;
            for (const auto& cc : cases) {
                os << bop_name(cc.kind);
                for (const auto& v : cc.operands) os << " " << hex_of(v.bits);
                auto r = numerics::eval_bop_contract(cc.kind, cc.operands);
                os << " " << hex_of(r.bits) << "\n";
            }
            write_output(out_path, os.str());
        } else if (*consistency_cmd) {
            auto rep = harness::run_consistency(random_tuples, op_corner, op_random, batches);
            std::cout << rep.to_text();
            if (!out_path.empty()) write_output(out_path, rep.to_json().dump(2) + "\n");
            if (!rep.all_pass()) return 1;
        } else if (*corpus_cmd) {
            for (const auto& m : build_corpus()) {
                write_output(out_path + "/" + m.id + ".json", save_model(m.graph));
                write_output(out_path + "/" + m.id + ".inputs.json", save_inputs(m.sample_inputs));
            }
            std::cout << "wrote " << build_corpus().size() << " models to " << out_path << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
