#pragma once

// JSON mapping for every configuration struct. Keys match the struct field
// names; missing keys keep their defaults and unknown keys are rejected.

#include <initializer_list>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cliquemining/embedder.hpp"
#include "cliquemining/mining.hpp"
#include "cliquemining/ms_loss.hpp"
#include "cliquemining/synth.hpp"

namespace cliquemining {

namespace detail {

template <typename J>
void reject_unknown(const J& j, const char* section, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw std::invalid_argument(std::string("config section '") + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw std::invalid_argument("unknown key '" + it.key() + "' in config section '" + section + "'");
  }
}

template <typename J, typename T>
void read(const J& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).template get<T>();
}

}  // namespace detail

template <typename J>
void to_json(J& j, const SynthConfig& c) {
  j = J{{"num_cities", c.num_cities},
        {"sequences_per_city", c.sequences_per_city},
        {"paths_per_city", c.paths_per_city},
        {"path_length", c.path_length},
        {"frame_spacing", c.frame_spacing},
        {"raw_dim", c.raw_dim},
        {"spatial_length_scale", c.spatial_length_scale},
        {"fine_length_scale", c.fine_length_scale},
        {"appearance_noise_sigma", c.appearance_noise_sigma},
        {"num_conditions", c.num_conditions},
        {"condition_offset_sigma", c.condition_offset_sigma},
        {"city_extent", c.city_extent},
        {"first_city", c.first_city},
        {"seed", c.seed},
        {"field_seed", nullptr},
        {"normalize", c.normalize}};
  if (c.field_seed) j["field_seed"] = *c.field_seed;
}

template <typename J>
void from_json(const J& j, SynthConfig& c) {
  detail::reject_unknown(j, "synth",
                         {"num_cities", "sequences_per_city", "paths_per_city", "path_length", "frame_spacing",
                          "raw_dim", "spatial_length_scale", "fine_length_scale", "appearance_noise_sigma",
                          "num_conditions", "condition_offset_sigma", "city_extent", "first_city", "seed",
                          "field_seed", "normalize"});
  detail::read(j, "num_cities", c.num_cities);
  detail::read(j, "sequences_per_city", c.sequences_per_city);
  detail::read(j, "paths_per_city", c.paths_per_city);
  detail::read(j, "path_length", c.path_length);
  detail::read(j, "frame_spacing", c.frame_spacing);
  detail::read(j, "raw_dim", c.raw_dim);
  detail::read(j, "spatial_length_scale", c.spatial_length_scale);
  detail::read(j, "fine_length_scale", c.fine_length_scale);
  detail::read(j, "appearance_noise_sigma", c.appearance_noise_sigma);
  detail::read(j, "num_conditions", c.num_conditions);
  detail::read(j, "condition_offset_sigma", c.condition_offset_sigma);
  detail::read(j, "city_extent", c.city_extent);
  detail::read(j, "first_city", c.first_city);
  detail::read(j, "seed", c.seed);
  if (j.contains("field_seed")) {
    const auto& f = j.at("field_seed");
    if (f.is_null()) c.field_seed.reset();
    else c.field_seed = f.template get<std::uint64_t>();
  }
  detail::read(j, "normalize", c.normalize);
}

template <typename J>
void to_json(J& j, const SparseConfig& c) {
  j = J{{"num_groups", c.num_groups}, {"group_size", c.group_size}, {"group_radius", c.group_radius}};
}

template <typename J>
void from_json(const J& j, SparseConfig& c) {
  detail::reject_unknown(j, "sparse", {"num_groups", "group_size", "group_radius"});
  detail::read(j, "num_groups", c.num_groups);
  detail::read(j, "group_size", c.group_size);
  detail::read(j, "group_radius", c.group_radius);
}

template <typename J>
void to_json(J& j, const MiningConfig& c) {
  j = J{{"S", c.S},
        {"tau", c.tau},
        {"N", c.N},
        {"K", c.K},
        {"clique_fraction", c.clique_fraction},
        {"num_batches", c.num_batches},
        {"sampling_mode", to_string(c.sampling_mode)},
        {"similarity_temperature", c.similarity_temperature},
        {"max_graph_restarts", c.max_graph_restarts},
        {"seed", c.seed}};
}

template <typename J>
void from_json(const J& j, MiningConfig& c) {
  detail::reject_unknown(j, "mining",
                         {"S", "tau", "N", "K", "clique_fraction", "num_batches", "sampling_mode",
                          "similarity_temperature", "max_graph_restarts", "seed"});
  detail::read(j, "S", c.S);
  detail::read(j, "tau", c.tau);
  detail::read(j, "N", c.N);
  detail::read(j, "K", c.K);
  detail::read(j, "clique_fraction", c.clique_fraction);
  detail::read(j, "num_batches", c.num_batches);
  if (j.contains("sampling_mode")) c.sampling_mode = parse_sampling_mode(j.at("sampling_mode").template get<std::string>());
  detail::read(j, "similarity_temperature", c.similarity_temperature);
  detail::read(j, "max_graph_restarts", c.max_graph_restarts);
  detail::read(j, "seed", c.seed);
}

template <typename J>
void to_json(J& j, const MsParams& p) {
  j = J{{"alpha", p.alpha}, {"beta", p.beta}, {"lambda", p.lambda}, {"epsilon", p.epsilon}, {"mining", p.mining}};
}

template <typename J>
void from_json(const J& j, MsParams& p) {
  detail::reject_unknown(j, "ms", {"alpha", "beta", "lambda", "epsilon", "mining"});
  detail::read(j, "alpha", p.alpha);
  detail::read(j, "beta", p.beta);
  detail::read(j, "lambda", p.lambda);
  detail::read(j, "epsilon", p.epsilon);
  detail::read(j, "mining", p.mining);
}

template <typename J>
void to_json(J& j, const TrainConfig& c) {
  j = J{{"epochs", c.epochs},
        {"learning_rate", c.learning_rate},
        {"momentum", c.momentum},
        {"init", to_string(c.init)},
        {"out_dim", c.out_dim},
        {"shuffle", c.shuffle},
        {"recompute_cliques", c.recompute_cliques},
        {"seed", c.seed}};
}

template <typename J>
void from_json(const J& j, TrainConfig& c) {
  detail::reject_unknown(j, "train",
                         {"epochs", "learning_rate", "momentum", "init", "out_dim", "shuffle", "recompute_cliques",
                          "seed"});
  detail::read(j, "epochs", c.epochs);
  detail::read(j, "learning_rate", c.learning_rate);
  detail::read(j, "momentum", c.momentum);
  if (j.contains("init")) c.init = parse_init_mode(j.at("init").template get<std::string>());
  detail::read(j, "out_dim", c.out_dim);
  detail::read(j, "shuffle", c.shuffle);
  detail::read(j, "recompute_cliques", c.recompute_cliques);
  detail::read(j, "seed", c.seed);
}

}  // namespace cliquemining
