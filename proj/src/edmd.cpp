#include "kmpc/edmd.hpp"

#include <cmath>
#include <cstdlib>

#include "kmpc/error.hpp"
#include "kmpc/linalg.hpp"
#include "kmpc/simd/kernels.hpp"

namespace kmpc {

namespace {

Vector window_values(const HistoryMatrix& v, const std::optional<Scaler>& scaler) {
  if (!scaler) return v.storage();
  return normalize(v, *scaler).storage();
}

Vector control_values(std::span<const double> u, const std::optional<Scaler>& scaler) {
  Vector out(u.begin(), u.end());
  if (scaler)
    for (double& x : out) x = scaler->normalize_control(x);
  return out;
}

}  // namespace

EdmdModel fit(const Dataset& ds, const Dictionary& dict, double ridge) {
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ArgumentError("edmd: ridge must be >= 0");
  if (ds.samples.empty()) throw ArgumentError("edmd: dataset is empty");
  const std::size_t window = ds.n * ds.h;
  if (dict.input_dim != window)
    throw ShapeError("edmd: dictionary input dimension " + std::to_string(dict.input_dim) +
                     " does not match window size " + std::to_string(window));

  const std::size_t nd = dict.output_dim();
  const std::size_t p = nd + ds.m;
  const auto& k = simd::kernels();

  Matrix gram(p, p);
  Matrix cross(p, nd);
  Vector phi(p);
  std::vector<Vector> lifted_in, lifted_out;
  lifted_in.reserve(ds.size());
  lifted_out.reserve(ds.size());
  for (const Sample& s : ds.samples) {
    if (s.u_k.size() != ds.m) throw ShapeError("edmd: sample control has wrong length");
    const Vector z = lift_dict(dict, window_values(s.v_k, ds.scaler));
    const Vector zn = lift_dict(dict, window_values(s.v_next, ds.scaler));
    const Vector u = control_values(s.u_k, ds.scaler);
    std::copy(z.begin(), z.end(), phi.begin());
    std::copy(u.begin(), u.end(), phi.begin() + static_cast<std::ptrdiff_t>(nd));
    k.ger(gram.data(), p, p, phi.data(), phi.data());
    k.ger(cross.data(), p, nd, phi.data(), zn.data());
    lifted_in.push_back(phi);
    lifted_out.push_back(zn);
  }
  for (std::size_t i = 0; i < p; ++i) gram(i, i) += ridge;

  Matrix sol;
  if (ridge > 0.0) {
    sol = linalg::solve_symmetric(gram, cross);
  } else {
    try {
      sol = linalg::solve_symmetric(gram, cross);
    } catch (const SingularityError&) {
      throw SingularityError("edmd: normal equations are rank deficient (" +
                             std::to_string(ds.size()) + " samples, " + std::to_string(p) +
                             " unknowns); use a positive ridge");
    }
  }

  EdmdModel model;
  model.dict = dict;
  model.scaler = ds.scaler;
  model.n = ds.n;
  model.h = ds.h;
  model.m = ds.m;
  model.ridge = ridge;
  model.a = Matrix(nd, nd);
  model.b = Matrix(nd, ds.m);
  for (std::size_t r = 0; r < nd; ++r) {
    for (std::size_t c = 0; c < nd; ++c) model.a(r, c) = sol(c, r);
    for (std::size_t c = 0; c < ds.m; ++c) model.b(r, c) = sol(nd + c, r);
  }
  model.c = Matrix(window, nd);
  for (std::size_t i = 0; i < window; ++i) model.c(i, 1 + i) = 1.0;

  double sq = 0.0, proj_sq = 0.0;
  Vector pred(nd);
  for (std::size_t s = 0; s < lifted_in.size(); ++s) {
    std::fill(pred.begin(), pred.end(), 0.0);
    k.gemv(model.a.data(), nd, nd, lifted_in[s].data(), pred.data());
    if (ds.m > 0) k.gemv(model.b.data(), nd, ds.m, lifted_in[s].data() + nd, pred.data());
    for (std::size_t i = 0; i < nd; ++i) {
      const double e = pred[i] - lifted_out[s][i];
      sq += e * e;
    }
    const Vector x = window_values(ds.samples[s].v_k, ds.scaler);
    const Vector back = matvec(model.c, std::span<const double>(lifted_in[s].data(), nd));
    for (std::size_t i = 0; i < window; ++i) proj_sq += (back[i] - x[i]) * (back[i] - x[i]);
  }
  const double count = static_cast<double>(lifted_in.size());
  model.residual = std::sqrt(sq / (count * static_cast<double>(nd)));
  model.projection_residual = std::sqrt(proj_sq / (count * static_cast<double>(window)));
  return model;
}

std::vector<HistoryMatrix> predict(const EdmdModel& model, const HistoryMatrix& v_k,
                                   const Matrix& u_seq) {
  if (v_k.rows() != model.n || v_k.cols() != model.h)
    throw ShapeError("edmd predict: window shape does not match the model");
  if (u_seq.rows() > 0 && u_seq.cols() != model.m)
    throw ShapeError("edmd predict: control sequence has wrong width");

  auto project = [&](const Vector& z) {
    HistoryMatrix out(model.n, model.h, matvec(model.c, z));
    return model.scaler ? denormalize(out, *model.scaler) : out;
  };

  std::vector<HistoryMatrix> out;
  Vector z = lift_dict(model.dict, window_values(v_k, model.scaler));
  out.push_back(project(z));
  for (std::size_t step = 0; step < u_seq.rows(); ++step) {
    Vector next = matvec(model.a, z);
    if (model.m > 0) {
      const Vector bu = matvec(model.b, control_values(u_seq.row(step), model.scaler));
      for (std::size_t i = 0; i < next.size(); ++i) next[i] += bu[i];
    }
    z = std::move(next);
    out.push_back(project(z));
  }
  return out;
}

Matrix select_rbf_centers(const Dataset& ds, std::size_t count) {
  if (count == 0 || count > ds.size())
    throw ArgumentError("rbf centers: need 1 <= count <= dataset size");
  const std::size_t window = ds.n * ds.h;
  Matrix centers(count, window);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t idx = (k * ds.size()) / count;
    const Vector x = window_values(ds.samples[idx].v_k, ds.scaler);
    std::copy(x.begin(), x.end(), centers.row(k).begin());
  }
  return centers;
}

Dictionary make_dictionary(const std::string& spec, const Dataset& ds) {
  const std::size_t window = ds.n * ds.h;
  if (spec == "identity") return Dictionary::identity(window);
  auto fail = [&]() -> Dictionary {
    throw ArgumentError("dictionary '" + spec +
                        "' not understood (expected identity, poly:<degree> or "
                        "rbf:<count>:<width>)");
  };
  try {
    if (spec.rfind("poly:", 0) == 0) {
      std::size_t used = 0;
      const int degree = std::stoi(spec.substr(5), &used);
      if (used != spec.size() - 5) return fail();
      return Dictionary::polynomial(window, degree);
    }
    if (spec.rfind("rbf:", 0) == 0) {
      const std::string rest = spec.substr(4);
      const auto colon = rest.find(':');
      if (colon == std::string::npos) return fail();
      const std::size_t count = std::stoul(rest.substr(0, colon));
      const double width = std::stod(rest.substr(colon + 1));
      return Dictionary::rbf(select_rbf_centers(ds, count), width);
    }
  } catch (const std::logic_error&) {
    return fail();
  }
  return fail();
}

LiftedModel to_lifted_model(const EdmdModel& model) {
  LiftedModel out;
  out.lifting = model.dict;
  out.a = model.a;
  out.b = model.b;
  out.projection = model.c;
  out.scaler = model.scaler;
  out.n = model.n;
  out.h = model.h;
  out.m = model.m;
  out.info = {{"dictionary", model.dict.describe()},
              {"ridge", model.ridge},
              {"residual", model.residual},
              {"projection_residual", model.projection_residual}};
  return out;
}

}  // namespace kmpc
