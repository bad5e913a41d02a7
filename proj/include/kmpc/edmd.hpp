#pragma once

// Extended DMD with control: lift both ends of every sample with a fixed
// dictionary and fit z+ = A z + B u by (ridge) least squares.

#include <optional>

#include "kmpc/dataset.hpp"
#include "kmpc/dictionary.hpp"
#include "kmpc/lifted_model.hpp"

namespace kmpc {

struct EdmdModel {
  Dictionary dict;
  Matrix a;  // N_d x N_d
  Matrix b;  // N_d x m (m may be 0)
  Matrix c;  // (n*H) x N_d, selects the raw coordinates of the lift
  std::optional<Scaler> scaler;
  std::size_t n = 0, h = 0, m = 0;
  double ridge = 0.0;
  double residual = 0.0;             // RMS of [A B][z; u] - z+ over all entries
  double projection_residual = 0.0;  // RMS of C z - x
};

// Works in normalized units when the dataset carries a scaler. With ridge = 0
// a rank-deficient regression throws SingularityError.
EdmdModel fit(const Dataset& ds, const Dictionary& dict, double ridge);

// Open-loop prediction. Element 0 is the reconstruction C lift(v_k); element
// k+1 follows k applications of the lifted dynamics under u_seq row k.
// Inputs and outputs are in the dataset's units (raw p.u. when a scaler is
// attached, since the model applies it).
std::vector<HistoryMatrix> predict(const EdmdModel& model, const HistoryMatrix& v_k,
                                   const Matrix& u_seq);

// Evenly spaced training windows (normalized when the dataset has a scaler).
Matrix select_rbf_centers(const Dataset& ds, std::size_t count);

// Parses "identity", "poly:<degree>" or "rbf:<count>:<width>".
Dictionary make_dictionary(const std::string& spec, const Dataset& ds);

LiftedModel to_lifted_model(const EdmdModel& model);

}  // namespace kmpc
