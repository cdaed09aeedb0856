#pragma once

#include "facesculpt/features.hpp"
#include "facesculpt/tape.hpp"

namespace facesculpt::style {

// Norm floor applied before every cosine so zero vectors stay finite.
inline constexpr double kCosineEps = 1e-8;

// Graph-building forms over [k,d] feature-row nodes; these are what the
// texture optimizer differentiates through.
ad::NodeId cosine_cost(ad::Tape& tape, ad::NodeId a_rows, ad::NodeId b_rows);
ad::NodeId remd_style_loss(ad::Tape& tape, ad::NodeId a_rows, ad::NodeId b_rows);
ad::NodeId self_similarity_content_loss(ad::Tape& tape, ad::NodeId a_rows, ad::NodeId b_rows);
// remd(style) + beta * self-similarity(content)
ad::NodeId texture_loss(ad::Tape& tape, ad::NodeId iz_rows, ad::NodeId ic_rows,
                        ad::NodeId y_rows, double beta);

// Value-level wrappers over feature stacks. The content loss insists the two
// stacks were sampled at the same pixels.
std::vector<std::vector<double>> cosine_cost(const features::FeatureStack& a,
                                             const features::FeatureStack& b);
double remd_style_loss(const features::FeatureStack& a, const features::FeatureStack& b);
double self_similarity_content_loss(const features::FeatureStack& a,
                                    const features::FeatureStack& b);
double texture_loss(const features::FeatureStack& iz, const features::FeatureStack& ic,
                    const features::FeatureStack& y, double beta);

}  // namespace facesculpt::style
