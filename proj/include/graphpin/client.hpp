#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "graphpin/evaluators.hpp"
#include "graphpin/protocol.hpp"

// Client-side machinery: the consensus task setup both parties derive from
// the model, trace and commitment construction for a (possibly faulty)
// party, and builders for every opening the arbitrator verifies.

namespace graphpin {

struct TaskSetup {
    std::shared_ptr<const Graph> graph_ptr; // owned so the setup is self-contained
    std::map<std::string, Tensor> inputs;
    ProtocolParams params;
    std::string model_id;
    std::vector<std::string> order;   // topological node ids
    std::vector<std::string> sources; // graph inputs then initializers
    std::vector<std::shared_ptr<const Circuit>> circuits;            // per op
    std::vector<std::shared_ptr<const ViCommitment>> p2s;            // per op
    std::vector<std::vector<std::vector<uint8_t>>> wiring;           // per op, then out record
    ViCommitment p1s;
    TaskRecord record;
    uint64_t max_n2 = 0;

    uint64_t n1() const { return order.size(); }
    uint32_t k() const { return params.k; }
    const Graph& graph() const { return *graph_ptr; }
};

inline TaskSetup build_task_setup(const Graph& graph_in, std::map<std::string, Tensor> inputs,
                                  ProtocolParams params, std::string model_id) {
    TaskSetup s;
    s.graph_ptr = std::make_shared<Graph>(graph_in);
    const Graph& g = *s.graph_ptr;
    s.inputs = std::move(inputs);
    s.params = params;
    s.model_id = std::move(model_id);
    s.order = topo_order_ops(g);
    s.sources = source_order(g);

    std::map<std::string, std::pair<uint32_t, uint32_t>> producer; // edge -> (record, slot)
    for (uint32_t i = 0; i < s.sources.size(); ++i) producer[s.sources[i]] = {0, i};
    for (uint32_t i = 0; i < s.order.size(); ++i) producer[g.find_node(s.order[i])->outputs[0]] = {i + 1, 0};

    std::vector<std::vector<uint8_t>> interior;
    for (uint32_t i = 0; i < s.order.size(); ++i) {
        const OpNode* n = g.find_node(s.order[i]);
        auto in_meta = node_input_meta(g, *n);
        auto circ = CircuitCache::instance().get_or_lower(*n, in_meta);
        auto p2s = p2s_commitment(circ, params.k);
        s.circuits.push_back(circ);
        s.p2s.push_back(p2s);
        s.max_n2 = std::max<uint64_t>(s.max_n2, circ->vertices.size());
        std::vector<std::vector<uint8_t>> cells;
        for (size_t slot = 0; slot < n->inputs.size(); ++slot) {
            auto [rec, rslot] = producer.at(n->inputs[slot]);
            cells.push_back(enc::wiring_cell(rec, rslot, static_cast<uint32_t>(shape_elems(in_meta[slot].shape))));
        }
        Digest wroot = cells_root(cells, params.k, TreeKind::Wiring);
        interior.push_back(encode_p1s_leaf(ViTag::Op, p2s->root, wroot,
                                           static_cast<uint32_t>(circ->vertices.size()),
                                           static_cast<uint32_t>(cells.size())));
        s.wiring.push_back(std::move(cells));
    }
    std::vector<std::vector<uint8_t>> out_cells;
    for (const auto& name : g.graph_outputs) {
        auto [rec, rslot] = producer.at(name);
        out_cells.push_back(enc::wiring_cell(rec, rslot, static_cast<uint32_t>(shape_elems(g.edges.at(name).shape))));
    }
    Digest out_wroot = cells_root(out_cells, params.k, TreeKind::Wiring);
    std::vector<uint8_t> in_leaf =
        encode_p1s_leaf(ViTag::In, Digest{}, Digest{}, 0, static_cast<uint32_t>(s.sources.size()));
    std::vector<uint8_t> out_leaf = encode_p1s_leaf(ViTag::Out, Digest{}, out_wroot, 0,
                                                    static_cast<uint32_t>(g.graph_outputs.size()));
    s.wiring.push_back(std::move(out_cells));
    s.p1s = build_vi_commitment(TreeKind::P1S, params.k, std::move(in_leaf), std::move(interior),
                                std::move(out_leaf));

    std::vector<Digest> source_digests;
    std::map<std::string, Tensor> store;
    eval_detail::bind_inputs(g, s.inputs, store);
    for (const auto& name : s.sources) source_digests.push_back(tensor_digest(store.at(name), params.k));

    s.record.model_id = s.model_id;
    s.record.k = params.k;
    s.record.n1 = s.order.size();
    s.record.p1s_root = s.p1s.root;
    s.record.p1s_in_digest = s.p1s.in_digest;
    s.record.p1s_body_root = s.p1s.body.root;
    s.record.p1s_out_digest = s.p1s.out_digest;
    s.record.inputs_commitment = digest_list_root(source_digests);
    if (s.params.auto_deadlines) {
        s.params.t_op = 16 + static_cast<Tick>(s.n1() / 4);
        s.params.t_bop = 16 + static_cast<Tick>(s.max_n2 / 64);
        s.params.t_v = 2 * s.params.t_op + 32;
    }
    return s;
}

// ---------------------------------------------------------------------
// Commitment builders
// ---------------------------------------------------------------------

inline std::vector<uint8_t> encode_p1c_record(const OpRecord& rec) {
    switch (rec.tag) {
        case ViTag::In:
            return encode_p1c_leaf(ViTag::In, Digest{}, Digest{}, digest_list_root(rec.output_digests));
        case ViTag::Out:
            return encode_p1c_leaf(ViTag::Out, Digest{}, digest_list_root(rec.input_digests), Digest{});
        default:
            return encode_p1c_leaf(ViTag::Op, rec.p2s_root, digest_list_root(rec.input_digests),
                                   rec.output_digests.at(0));
    }
}

inline ViCommitment build_p1c_commitment(const OpTrace& tr, uint32_t k) {
    std::vector<std::vector<uint8_t>> interior;
    for (size_t i = 1; i + 1 < tr.records.size(); ++i) interior.push_back(encode_p1c_record(tr.records[i]));
    return build_vi_commitment(TreeKind::P1C, k, encode_p1c_record(tr.records.front()), std::move(interior),
                               encode_p1c_record(tr.records.back()));
}

inline ViCommitment build_p2c_commitment(const Circuit& c, const BopTrace& tr,
                                         const std::vector<Digest>& input_tensor_digests, uint32_t k) {
    std::vector<std::vector<uint8_t>> interior;
    for (size_t i = 1; i + 1 < tr.vis.size(); ++i) interior.push_back(encode_vi(tr.vis[i], k));
    return build_vi_commitment(TreeKind::P2C, k, encode_vi(tr.vis.front(), k, &input_tensor_digests, &c.consts),
                               std::move(interior), encode_vi(tr.vis.back(), k));
}

// ---------------------------------------------------------------------
// Party data: the trace and trees one quorum member derives, with optional
// result corruption for adversarial runs.
// ---------------------------------------------------------------------

struct ResultFault {
    bool active = false;
    uint64_t op_interior = 0;  // topological op index
    uint64_t bop_interior = 0; // vertex index within the op's circuit
    uint32_t xor_mask = 1;
};

class PartyData {
  public:
    PartyData(const TaskSetup& setup, ResultFault fault = {}) : setup_(&setup), fault_(fault) { build_trace(); }

    const OpTrace& trace() const { return trace_; }
    const ViCommitment& p1c() const { return p1c_; }
    Digest claim_digest() const { return trace_.result_digest; }

    Claim make_claim(const std::string& name) const {
        return Claim{name, setup_->model_id, setup_->record.inputs_commitment, setup_->record.p1s_root,
                     claim_digest()};
    }

    struct P2Data {
        std::shared_ptr<const Circuit> circuit;
        BopTrace trace;
        std::shared_ptr<const ViCommitment> p2s;
        ViCommitment p2c;
        std::vector<Digest> input_digests;
        uint64_t op_interior = 0;
    };

    // Phase-2 material for one operation, produced on demand.
    const P2Data& p2(uint64_t op_interior) {
        auto it = p2_.find(op_interior);
        if (it != p2_.end()) return it->second;
        const auto& circ = setup_->circuits.at(op_interior);
        std::vector<ScalarValue> flat = op_inputs_flat(op_interior);
        BopTrace tr;
        if (fault_.active && fault_.op_interior == op_interior) {
            tr = eval_circuit_faulted(circ, flat);
        } else {
            tr = eval_circuit(circ, flat);
        }
        P2Data d{circ, std::move(tr), setup_->p2s.at(op_interior), {}, input_digests_of(op_interior), op_interior};
        d.p2c = build_p2c_commitment(*circ, d.trace, d.input_digests, setup_->k());
        auto [pos, fresh] = p2_.emplace(op_interior, std::move(d));
        return pos->second;
    }

    void drop_p2(uint64_t op_interior) { p2_.erase(op_interior); }

    // Adversarial mutation of one committed record; the trace and phase-1
    // tree are rebuilt around the lie.
    enum class RecordField { StructureRoot, InputDigest, OutputDigest };

    // Lie about one unanimously committed source digest in the in record.
    void corrupt_in_record_source(uint64_t slot) {
        trace_.records.front().output_digests.at(slot).bytes[0] ^= 1;
        p1c_ = build_p1c_commitment(trace_, setup_->k());
    }

    void corrupt_record(uint64_t op_interior, RecordField f, uint64_t slot = 0) {
        OpRecord& rec = trace_.records.at(op_interior + 1);
        switch (f) {
            case RecordField::StructureRoot: rec.p2s_root.bytes[0] ^= 1; break;
            case RecordField::InputDigest: rec.input_digests.at(slot).bytes[0] ^= 1; break;
            case RecordField::OutputDigest: rec.output_digests.at(0).bytes[0] ^= 1; break;
        }
        p1c_ = build_p1c_commitment(trace_, setup_->k());
    }

    std::vector<Digest> input_digests_of(uint64_t op_interior) const {
        return trace_.records.at(op_interior + 1).input_digests;
    }

    // ----- opening builders (phase 1) -----

    std::vector<Digest> p1_trident() const { return {p1c_.in_digest, p1c_.body.root, p1c_.out_digest}; }

    std::vector<Digest> p1_children(uint32_t descent_level, uint64_t prefix) const {
        return tree_children(p1c_.body, p1c_.body.depth() - descent_level, prefix);
    }

    std::vector<uint8_t> p1_leaf_bytes(TridentBranch br, uint64_t index) const {
        if (br == TridentBranch::In) return p1c_.in_leaf;
        if (br == TridentBranch::Out) return p1c_.out_leaf;
        return p1c_.body.leaves.at(index);
    }

    std::vector<std::vector<uint8_t>> p1_reveal_cells(TridentBranch br, uint64_t index) const {
        const OpRecord& rec = record_at(br, index);
        std::vector<std::vector<uint8_t>> cells;
        if (rec.tag == ViTag::In) return cells;
        for (const auto& d : rec.input_digests) cells.push_back(enc::digest_cell(d));
        return cells;
    }

    P1LeafBundle p1_bundle(TridentBranch br, uint64_t index, const LeafDispute& d) {
        P1LeafBundle b;
        b.leaf = p1_leaf_bytes(br, index);
        if (br == TridentBranch::In) {
            b.p1s_leaf = setup_->p1s.in_leaf;
        } else if (br == TridentBranch::Out) {
            b.p1s_leaf = setup_->p1s.out_leaf;
        } else {
            b.p1s_leaf = setup_->p1s.body.leaves.at(index);
            b.p1s_path = open_path(setup_->p1s.body, index);
        }
        uint64_t wiring_idx = br == TridentBranch::Out ? setup_->n1() : index;
        if (d.field == LeafDispute::Field::Output || d.field == LeafDispute::Field::InputSlot)
            b.wiring_cells = setup_->wiring.at(wiring_idx);
        if (d.field == LeafDispute::Field::InputSlot) {
            const OpRecord& rec = record_at(br, index);
            b.consumed_cell = open_path(digest_list_tree(rec.input_digests), d.index);
            auto w = enc::parse_wiring_cell(setup_->wiring.at(wiring_idx).at(d.index));
            if (w.producer_record == 0) {
                b.producer_leaf = p1c_.in_leaf;
                b.producer_out_cell =
                    open_path(digest_list_tree(trace_.records.front().output_digests), w.producer_slot);
            } else {
                b.producer_leaf = p1c_.body.leaves.at(w.producer_record - 1);
                b.producer_path = open_path(p1c_.body, w.producer_record - 1);
            }
        }
        return b;
    }

    // ----- opening builders (phase 2) -----

    std::vector<Digest> p2_trident(uint64_t op_interior) {
        const P2Data& d = p2(op_interior);
        return {d.p2c.in_digest, d.p2c.body.root, d.p2c.out_digest,
                d.p2s->in_digest, d.p2s->body.root, d.p2s->out_digest};
    }

    std::vector<Digest> p2_children(uint64_t op_interior, uint32_t descent_level, uint64_t prefix) {
        const auto& body = p2(op_interior).p2c.body;
        return tree_children(body, body.depth() - descent_level, prefix);
    }

    std::vector<uint8_t> p2_leaf_bytes(uint64_t op_interior, TridentBranch br, uint64_t index) {
        const P2Data& d = p2(op_interior);
        if (br == TridentBranch::In) return d.p2c.in_leaf;
        if (br == TridentBranch::Out) return d.p2c.out_leaf;
        return d.p2c.body.leaves.at(index);
    }

    std::vector<std::vector<uint8_t>> p2_reveal_cells(uint64_t op_interior, TridentBranch br, uint64_t index) {
        const P2Data& d = p2(op_interior);
        std::vector<std::vector<uint8_t>> cells;
        if (br == TridentBranch::In) return cells;
        if (br == TridentBranch::Out) {
            for (const auto& v : d.trace.vis.back().operands) cells.push_back(enc::value_cell(v));
            return cells;
        }
        for (const auto& v : d.trace.vis.at(index + 1).operands) cells.push_back(enc::value_cell(v));
        return cells;
    }

    P2LeafBundle p2_bundle(uint64_t op_interior, TridentBranch br, uint64_t index, const LeafDispute& dsp) {
        const P2Data& d = p2(op_interior);
        const Circuit& c = *d.circuit;
        P2LeafBundle b;
        b.leaf = p2_leaf_bytes(op_interior, br, index);
        b.p2s_in_leaf = d.p2s->in_leaf;
        if (br == TridentBranch::In) {
            b.p2s_leaf = d.p2s->in_leaf;
            b.input_tensor_digests = d.input_digests;
            for (const auto& cv : c.consts) b.const_cells.push_back(enc::value_cell(cv));
            return b;
        }
        if (br == TridentBranch::Out) {
            b.p2s_leaf = d.p2s->out_leaf;
            uint64_t e = dsp.index;
            auto out_sym = serialize_circuit(c).back();
            b.p2s_out_cell = open_path(operand_tree_symbolic(out_sym, setup_->k()), e);
            b.out_value_cell = open_path(operand_tree_concrete(d.trace.vis.back(), setup_->k()), e);
            b.operands.push_back(prove_var(d, c.outputs.at(e), MerklePath{}));
            return b;
        }
        b.p2s_leaf = d.p2s->body.leaves.at(index);
        b.p2s_path = open_path(d.p2s->body, index);
        const Vertex& vx = c.vertices.at(index);
        for (size_t q = 0; q < vx.operands.size(); ++q) b.p2s_op_cells.push_back(enc::var_cell(vx.operands[q]));
        if (dsp.field == LeafDispute::Field::Operand || dsp.field == LeafDispute::Field::Result) {
            auto conc_ops = operand_tree_concrete(d.trace.vis.at(index + 1), setup_->k());
            for (size_t q = 0; q < vx.operands.size(); ++q) {
                MerklePath cell = open_path(conc_ops, q);
                b.operands.push_back(prove_var(d, vx.operands[q], std::move(cell)));
            }
        }
        return b;
    }

  private:
    const OpRecord& record_at(TridentBranch br, uint64_t index) const {
        if (br == TridentBranch::In) return trace_.records.front();
        if (br == TridentBranch::Out) return trace_.records.back();
        return trace_.records.at(index + 1);
    }

    OperandProof prove_var(const P2Data& d, Var var, MerklePath operand_cell) {
        const Circuit& c = *d.circuit;
        OperandProof p;
        p.operand_cell = std::move(operand_cell);
        p.claimed = d.trace.values.at(var);
        if (var >= c.base()) {
            p.source = OperandProof::Source::Interior;
            uint64_t def_pos = var - c.base();
            p.defining_leaf = d.p2c.body.leaves.at(def_pos);
            p.defining_path = open_path(d.p2c.body, def_pos);
        } else if (var < c.n_inputs) {
            p.source = OperandProof::Source::TensorInput;
            auto [slot, elem] = c.locate_input(var);
            p.input_digest_cell = open_path(digest_list_tree(d.input_digests), slot);
            p.tensor_elem = open_path(input_tensor_tree(d, slot), elem);
        } else {
            p.source = OperandProof::Source::Const;
            auto vis_in = serialize_circuit(c).front();
            p.const_cell = open_path(operand_tree_symbolic(vis_in, setup_->k()), var - c.n_inputs);
        }
        return p;
    }

    MerkleTree input_tensor_tree(const P2Data& d, size_t slot) {
        const OpNode* n = setup_->graph().find_node(setup_->order.at(d.op_interior));
        return tensor_tree(tensor_of_edge(n->inputs.at(slot)), setup_->k());
    }

    Tensor tensor_of_edge(const std::string& edge) const {
        for (size_t i = 0; i < setup_->order.size(); ++i)
            if (setup_->graph().find_node(setup_->order[i])->outputs[0] == edge)
                return trace_.records.at(i + 1).output;
        auto it = setup_->inputs.find(edge);
        if (it != setup_->inputs.end()) return it->second;
        return setup_->graph().initializers.at(edge);
    }

    std::vector<ScalarValue> op_inputs_flat(uint64_t op_interior) const {
        const OpNode* n = setup_->graph().find_node(setup_->order.at(op_interior));
        std::vector<ScalarValue> flat;
        for (const auto& e : n->inputs) {
            Tensor t = tensor_of_edge(e);
            for (int64_t i = 0; i < t.size(); ++i) flat.push_back(t.at(i));
        }
        return flat;
    }

    BopTrace eval_circuit_faulted(const std::shared_ptr<const Circuit>& circ, const std::vector<ScalarValue>& in) {
        BopTrace tr = eval_circuit(circ, in);
        // corrupt one committed result and propagate it forward
        uint64_t target = fault_.bop_interior;
        const Circuit& c = *circ;
        std::vector<ScalarValue>& vals = tr.values;
        ScalarValue& r = tr.vis.at(target + 1).result;
        uint32_t mask = fault_.xor_mask;
        if (r.dtype == DType::U8) mask &= 0xFF;
        r.bits ^= mask;
        vals.at(c.result_var(target)) = r;
        for (size_t t = target + 1; t < c.vertices.size(); ++t) {
            const Vertex& vx = c.vertices[t];
            ConcreteVI& vi = tr.vis.at(t + 1);
            for (size_t q = 0; q < vx.operands.size(); ++q) vi.operands[q] = vals.at(vx.operands[q]);
            vi.result = vx.operands.size() == 2
                            ? numerics::eval_bop_reference_scalar(vx.kind, vi.operands[0], vi.operands[1])
                            : numerics::eval_bop_reference_scalar(vx.kind, vi.operands[0]);
            vals.at(c.result_var(t)) = vi.result;
        }
        ConcreteVI& out = tr.vis.back();
        out.operands.clear();
        for (Var v : c.outputs) out.operands.push_back(vals.at(v));
        return tr;
    }

    void build_trace() {
        const Graph& g = setup_->graph();
        uint32_t k = setup_->k();
        std::map<std::string, Tensor> store;
        eval_detail::bind_inputs(g, setup_->inputs, store);
        std::map<std::string, Digest> digests;

        OpRecord in;
        in.tag = ViTag::In;
        for (const auto& name : setup_->sources) {
            Digest d = tensor_digest(store.at(name), k);
            digests[name] = d;
            in.output_digests.push_back(d);
        }
        trace_.k = k;
        trace_.records.push_back(std::move(in));
        for (size_t i = 0; i < setup_->order.size(); ++i) {
            const OpNode* n = g.find_node(setup_->order[i]);
            Tensor out;
            if (fault_.active && fault_.op_interior == i) {
                std::vector<ScalarValue> flat;
                for (const auto& e : n->inputs) {
                    const Tensor& t = store.at(e);
                    for (int64_t j = 0; j < t.size(); ++j) flat.push_back(t.at(j));
                }
                BopTrace btr = eval_circuit_faulted(setup_->circuits[i], flat);
                const auto& meta = g.edges.at(n->outputs[0]);
                out = Tensor(meta.dtype, meta.shape);
                auto vals = btr.outputs();
                for (int64_t j = 0; j < out.size(); ++j) out.data[static_cast<size_t>(j)] = vals.at(j).bits;
            } else {
                std::vector<const Tensor*> tin;
                for (const auto& e : n->inputs) tin.push_back(&store.at(e));
                out = kernels::eval_node(*n, tin, g.edges.at(n->outputs[0]), 1);
            }
            OpRecord rec;
            rec.tag = ViTag::Op;
            rec.node_id = n->id;
            rec.p2s_root = setup_->p2s[i]->root;
            for (const auto& e : n->inputs) rec.input_digests.push_back(digests.at(e));
            Digest od = tensor_digest(out, k);
            rec.output_digests.push_back(od);
            digests[n->outputs[0]] = od;
            rec.output = out;
            store[n->outputs[0]] = std::move(out);
            trace_.records.push_back(std::move(rec));
        }
        OpRecord out;
        out.tag = ViTag::Out;
        for (const auto& name : g.graph_outputs) out.input_digests.push_back(digests.at(name));
        trace_.result_digest = digest_list_root(out.input_digests);
        trace_.records.push_back(std::move(out));
        trace_.counter = TraceCounterGuard(static_cast<int64_t>(trace_.records.size()));
        p1c_ = build_p1c_commitment(trace_, k);
    }

    const TaskSetup* setup_;
    ResultFault fault_;
    OpTrace trace_;
    ViCommitment p1c_;
    std::map<uint64_t, P2Data> p2_;
};

} // namespace graphpin
