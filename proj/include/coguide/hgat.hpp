#pragma once

// Relation-specific multi-head graph attention.
//
// For node i and head k, with r = relation of edge j -> i:
//   alpha[r,k](i, j) = softmax over j in N^{r,i} of (Wq[r,k] h_i) . (Wk[r,k] h_j) / sqrt(d)
//   h'_i[k]          = sigma( sum over all incoming j of alpha[r,k](i, j) * Wv[r,k] h_j )
// and h'_i is the concatenation of its K heads. Attention is normalized within
// each relation's neighborhood while messages are summed across relations.

#include <cmath>
#include <string>
#include <vector>

#include "coguide/autodiff.hpp"
#include "coguide/graph.hpp"

namespace coguide {

// Per relation: d x d value, query and key transforms. Head k owns the
// column block [k*d/K, (k+1)*d/K) of each.
template <class T>
struct RelationWeights {
  Parameter<T>* value = nullptr;
  Parameter<T>* query = nullptr;
  Parameter<T>* key = nullptr;
};

// attention[r][k] is the N x N weight matrix of relation r, head k.
template <class T>
struct AttentionTrace {
  std::vector<std::vector<std::vector<Matrix<T>>>> layers;  // [layer][relation][head]
};

template <class T>
class HgatLayer {
 public:
  HgatLayer() = default;
  HgatLayer(ParamStore<T>& store, const std::string& prefix, std::size_t dim, std::size_t heads,
            std::size_t relations, T slope, Rng& rng)
      : dim_(dim), heads_(heads), slope_(slope) {
    if (heads == 0 || dim % heads != 0) {
      throw DimensionError("hgat '" + prefix + "': dim " + std::to_string(dim) + " not divisible by " +
                           std::to_string(heads) + " heads");
    }
    for (std::size_t r = 0; r < relations; ++r) {
      const std::string rp = prefix + ".rel" + std::to_string(r);
      RelationWeights<T> w;
      w.value = &store.add(rp + ".wv", dim, dim, Init::uniform_fan_in, rng);
      w.query = &store.add(rp + ".wq", dim, dim, Init::uniform_fan_in, rng);
      w.key = &store.add(rp + ".wk", dim, dim, Init::uniform_fan_in, rng);
      weights_.push_back(w);
    }
  }

  std::size_t dim() const { return dim_; }
  std::size_t heads() const { return heads_; }
  std::size_t relations() const { return weights_.size(); }
  T slope() const { return slope_; }
  const RelationWeights<T>& weights(std::size_t r) const { return weights_[r]; }

  Tensor<T> operator()(const Tensor<T>& nodes, const HeteroGraph& g,
                       std::vector<std::vector<Matrix<T>>>* trace = nullptr) const {
    if (nodes.rows() != g.num_nodes() || nodes.cols() != dim_) {
      throw DimensionError("hgat_layer: node states " + nodes.shape().str() + " vs graph with " +
                           std::to_string(g.num_nodes()) + " nodes of width " + std::to_string(dim_));
    }
    if (g.num_relations() != weights_.size()) {
      throw ContractError("hgat_layer: graph has " + std::to_string(g.num_relations()) +
                          " relations, layer has " + std::to_string(weights_.size()));
    }
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      bool any = false;
      for (std::size_t r = 0; r < g.num_relations() && !any; ++r) any = !g.incoming(r, i).empty();
      if (!any) throw ContractError("hgat_layer: node " + std::to_string(i) + " has no incoming edges");
    }
    auto& tape = nodes.tape();
    const std::size_t hd = dim_ / heads_;
    const T inv = T{1} / std::sqrt(static_cast<T>(dim_));
    if (trace) trace->assign(weights_.size(), std::vector<Matrix<T>>(heads_));

    std::vector<Tensor<T>> q(weights_.size()), k(weights_.size()), v(weights_.size());
    std::vector<Matrix<unsigned char>> masks;
    for (std::size_t r = 0; r < weights_.size(); ++r) {
      q[r] = ops::matmul(nodes, tape.param(*weights_[r].query));
      k[r] = ops::matmul(nodes, tape.param(*weights_[r].key));
      v[r] = ops::matmul(nodes, tape.param(*weights_[r].value));
      masks.push_back(g.relation_mask(r));
    }
    std::vector<Tensor<T>> head_out;
    for (std::size_t h = 0; h < heads_; ++h) {
      Tensor<T> acc;
      for (std::size_t r = 0; r < weights_.size(); ++r) {
        auto qh = ops::slice_cols(q[r], h * hd, hd);
        auto kh = ops::slice_cols(k[r], h * hd, hd);
        auto vh = ops::slice_cols(v[r], h * hd, hd);
        auto alpha = ops::masked_softmax_rows(ops::scale(ops::matmul_nt(qh, kh), inv), masks[r]);
        if (trace) (*trace)[r][h] = alpha.value();
        auto msg = ops::matmul(alpha, vh);
        acc = acc.valid() ? ops::add(acc, msg) : msg;
      }
      head_out.push_back(ops::leaky_relu(acc, slope_));
    }
    return heads_ == 1 ? head_out[0] : ops::concat_cols(head_out);
  }

 private:
  std::size_t dim_ = 0;
  std::size_t heads_ = 1;
  T slope_ = T(0.2);
  std::vector<RelationWeights<T>> weights_;
};

template <class T>
class HgatStack {
 public:
  HgatStack() = default;
  HgatStack(ParamStore<T>& store, const std::string& prefix, std::size_t dim, std::size_t heads,
            std::size_t relations, std::size_t layers, T slope, Rng& rng) {
    if (layers == 0) throw ContractError("hgat_stack '" + prefix + "': need at least one layer");
    for (std::size_t l = 0; l < layers; ++l) {
      layers_.emplace_back(store, prefix + ".layer" + std::to_string(l), dim, heads, relations, slope, rng);
    }
  }

  std::size_t num_layers() const { return layers_.size(); }
  const HgatLayer<T>& layer(std::size_t l) const { return layers_[l]; }

  Tensor<T> operator()(const Tensor<T>& nodes, const HeteroGraph& g, AttentionTrace<T>* trace = nullptr) const {
    if (trace) trace->layers.assign(layers_.size(), {});
    Tensor<T> h = nodes;
    for (std::size_t l = 0; l < layers_.size(); ++l) h = layers_[l](h, g, trace ? &trace->layers[l] : nullptr);
    return h;
  }

 private:
  std::vector<HgatLayer<T>> layers_;
};

}  // namespace coguide
