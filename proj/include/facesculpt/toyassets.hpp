#pragma once

#include <cstdint>
#include <vector>

#include "facesculpt/landmarks.hpp"
#include "facesculpt/mesh.hpp"
#include "facesculpt/rng.hpp"
#include "facesculpt/tensor.hpp"

namespace facesculpt::toy {

// 500-vertex face dome on a 25x20 grid with margin-safe UVs and all 68
// landmark ids mapped to distinct grid vertices.
mesh::TriMesh make_face_mesh();

// Affine pixel camera for the toy mesh: x right, y down, 100 px per model
// unit, centered in a 256x256 viewport.
mesh::Projection make_projection();

// The toy mesh's landmark layout in projected pixel coordinates.
LandmarkSet canonical_face();

// Normal-face sample: canonical layout under smooth global similarity jitter
// plus local feature jitters and per-point noise.
LandmarkSet sample_normal_face(Rng& rng);
std::vector<LandmarkSet> sample_normal_faces(int count, std::uint64_t seed);

// Deterministic art-style warps. Mode 0 widens (broad jaw, wide mouth,
// raised brows); mode 1 elongates (long jaw and nose, narrow mouth). Both
// leave the eye points and the mouth center of the input unchanged, so
// anchor-based alignment cannot undo them.
LandmarkSet exaggerate(const LandmarkSet& ls, int mode);

// Art corpus: exaggerated normal samples, modes alternating 0, 1, 0, 1, ...
std::vector<LandmarkSet> sample_art_faces(int count, std::uint64_t seed,
                                          std::vector<int>* modes = nullptr);

// Skin-toned face texture matching the toy mesh UV layout.
ad::Tensor make_content_texture(int h, int w);

// High-contrast striped and blobbed style exemplar.
ad::Tensor make_style_image(int h, int w, std::uint64_t seed);

}  // namespace facesculpt::toy
