// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 mptrack contributors

#include "mptrack/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mpt {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
}  // namespace

// ---------------------------------------------------------------- ParamStore

Parameter& ParamStore::create(const std::string& name, Tensor init, bool frozen) {
    if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter name: " + name);
    Parameter p;
    p.name = name;
    p.grad = Tensor(init.rows(), init.cols());
    p.value = std::move(init);
    p.frozen = frozen;
    p.index = params_.size();
    params_.push_back(std::move(p));
    return params_.back();
}

Parameter* ParamStore::find(const std::string& name) {
    for (auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

std::size_t ParamStore::total_elements() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParamStore::zero_grads() {
    for (auto& p : params_) p.zero_grad();
}

std::uint64_t ParamStore::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : params_) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p.value.data());
        const std::size_t n = p.value.size() * sizeof(double);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

// ---------------------------------------------------------------------- Tape

int Tape::push(Tensor value, bool needs_grad) {
    Slot s;
    s.value = std::move(value);
    s.needs_grad = grad_enabled_ && needs_grad;
    slots_.push_back(std::move(s));
    return static_cast<int>(slots_.size()) - 1;
}

Tensor& Tape::grad_ref(int id) {
    Slot& s = slots_[id];
    if (!s.grad_alloc) {
        s.grad = Tensor(s.value.rows(), s.value.cols());
        s.grad_alloc = true;
    }
    return s.grad;
}

void Tape::add_to_grad(int id, const Tensor& g) {
    grad_ref(id).add_inplace(g);
}

const Tensor& Tape::grad(Var v) const {
    static const Tensor empty;
    const Slot& s = slots_[v.id];
    return s.grad_alloc ? s.grad : empty;
}

Var Tape::input(Tensor value) {
    return Var{push(std::move(value), false)};
}

Var Tape::param(Parameter& p) {
    const int id = push(p.value, !p.frozen);
    slots_[id].param = &p;
    return Var{id};
}

// ------------------------------------------------------------ linear algebra

Var Tape::matmul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.cols() != B.rows()) throw std::invalid_argument("matmul: inner dims disagree");
    Tensor C(A.rows(), B.cols());
    kernels::matmul_nn(A.data(), B.data(), C.data(), A.rows(), A.cols(), B.cols(), false);
    const bool na = needs(a), nb = needs(b);
    const int id = push(std::move(C), na || nb);
    if (slots_[id].needs_grad)
        slots_[id].backward = [a, b, na, nb](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            const Tensor& A = t.value(a);
            const Tensor& B = t.value(b);
            if (na)
                kernels::matmul_nt(dC.data(), B.data(), t.grad_ref(a.id).data(), dC.rows(),
                                   dC.cols(), B.rows(), true);
            if (nb)
                kernels::matmul_tn(A.data(), dC.data(), t.grad_ref(b.id).data(), A.cols(),
                                   A.rows(), dC.cols(), true);
        };
    return Var{id};
}

Var Tape::matmul_nt(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.cols() != B.cols()) throw std::invalid_argument("matmul_nt: inner dims disagree");
    Tensor C(A.rows(), B.rows());
    kernels::matmul_nt(A.data(), B.data(), C.data(), A.rows(), A.cols(), B.rows(), false);
    const bool na = needs(a), nb = needs(b);
    const int id = push(std::move(C), na || nb);
    if (slots_[id].needs_grad)
        slots_[id].backward = [a, b, na, nb](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;   // [m,n]
            const Tensor& A = t.value(a);             // [m,k]
            const Tensor& B = t.value(b);             // [n,k]
            if (na)  // dA = dC * B
                kernels::matmul_nn(dC.data(), B.data(), t.grad_ref(a.id).data(), dC.rows(),
                                   dC.cols(), B.cols(), true);
            if (nb)  // dB = dC^T * A
                kernels::matmul_tn(dC.data(), A.data(), t.grad_ref(b.id).data(), dC.cols(),
                                   dC.rows(), A.cols(), true);
        };
    return Var{id};
}

Var Tape::transpose(Var a) {
    const Tensor& A = value(a);
    Tensor C(A.cols(), A.rows());
    for (std::size_t r = 0; r < A.rows(); ++r)
        for (std::size_t c = 0; c < A.cols(); ++c) C.at(c, r) = A.at(r, c);
    const int id = push(std::move(C), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            Tensor& dA = t.grad_ref(a.id);
            for (std::size_t r = 0; r < dC.rows(); ++r)
                for (std::size_t c = 0; c < dC.cols(); ++c) dA.at(c, r) += dC.at(r, c);
        };
    return Var{id};
}

// ------------------------------------------------------ elementwise / bcast

Var Tape::add(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) throw std::invalid_argument("add: shape mismatch");
    Tensor C = A;
    C.add_inplace(B);
    const bool na = needs(a), nb = needs(b);
    const int id = push(std::move(C), na || nb);
    if (slots_[id].needs_grad)
        slots_[id].backward = [a, b, na, nb](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            if (na) t.add_to_grad(a.id, dC);
            if (nb) t.add_to_grad(b.id, dC);
        };
    return Var{id};
}

Var Tape::sub(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) throw std::invalid_argument("sub: shape mismatch");
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C[i] -= B[i];
    const bool na = needs(a), nb = needs(b);
    const int id = push(std::move(C), na || nb);
    if (slots_[id].needs_grad)
        slots_[id].backward = [a, b, na, nb](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            if (na) t.add_to_grad(a.id, dC);
            if (nb) {
                Tensor& dB = t.grad_ref(b.id);
                for (std::size_t i = 0; i < dC.size(); ++i) dB[i] -= dC[i];
            }
        };
    return Var{id};
}

Var Tape::mul(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) throw std::invalid_argument("mul: shape mismatch");
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
    const bool na = needs(a), nb = needs(b);
    const int id = push(std::move(C), na || nb);
    if (slots_[id].needs_grad)
        slots_[id].backward = [a, b, na, nb](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            const Tensor& A = t.value(a);
            const Tensor& B = t.value(b);
            if (na) {
                Tensor& dA = t.grad_ref(a.id);
                for (std::size_t i = 0; i < dC.size(); ++i) dA[i] += dC[i] * B[i];
            }
            if (nb) {
                Tensor& dB = t.grad_ref(b.id);
                for (std::size_t i = 0; i < dC.size(); ++i) dB[i] += dC[i] * A[i];
            }
        };
    return Var{id};
}

Var Tape::div(Var a, Var b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) throw std::invalid_argument("div: shape mismatch");
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C[i] /= B[i];
    const bool na = needs(a), nb = needs(b);
    const int id = push(std::move(C), na || nb);
    if (slots_[id].needs_grad)
        slots_[id].backward = [a, b, na, nb](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            const Tensor& A = t.value(a);
            const Tensor& B = t.value(b);
            if (na) {
                Tensor& dA = t.grad_ref(a.id);
                for (std::size_t i = 0; i < dC.size(); ++i) dA[i] += dC[i] / B[i];
            }
            if (nb) {
                Tensor& dB = t.grad_ref(b.id);
                for (std::size_t i = 0; i < dC.size(); ++i)
                    dB[i] -= dC[i] * A[i] / (B[i] * B[i]);
            }
        };
    return Var{id};
}

Var Tape::add_row(Var m, Var row) {
    const Tensor& M = value(m);
    const Tensor& R = value(row);
    if (R.rows() != 1 || R.cols() != M.cols())
        throw std::invalid_argument("add_row: row shape mismatch");
    Tensor C = M;
    for (std::size_t r = 0; r < C.rows(); ++r)
        for (std::size_t c = 0; c < C.cols(); ++c) C.at(r, c) += R[c];
    const bool nm = needs(m), nr = needs(row);
    const int id = push(std::move(C), nm || nr);
    if (slots_[id].needs_grad)
        slots_[id].backward = [m, row, nm, nr](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            if (nm) t.add_to_grad(m.id, dC);
            if (nr) {
                Tensor& dR = t.grad_ref(row.id);
                for (std::size_t r = 0; r < dC.rows(); ++r)
                    for (std::size_t c = 0; c < dC.cols(); ++c) dR[c] += dC.at(r, c);
            }
        };
    return Var{id};
}

Var Tape::scale(Var a, double c) {
    Tensor C = value(a);
    C.scale_inplace(c);
    const int id = push(std::move(C), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a, c](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            Tensor& dA = t.grad_ref(a.id);
            for (std::size_t i = 0; i < dC.size(); ++i) dA[i] += c * dC[i];
        };
    return Var{id};
}

Var Tape::add_const(Var a, double c) {
    Tensor C = value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] += c;
    const int id = push(std::move(C), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a](Tape& t, int self) { t.add_to_grad(a.id, t.slots_[self].grad); };
    return Var{id};
}

Var Tape::mul_bcast(Var a, Var s) {
    const Tensor& A = value(a);
    const Tensor& S = value(s);
    if (S.size() != 1) throw std::invalid_argument("mul_bcast: scalar expected");
    Tensor C = A;
    C.scale_inplace(S[0]);
    const bool na = needs(a), ns = needs(s);
    const int id = push(std::move(C), na || ns);
    if (slots_[id].needs_grad)
        slots_[id].backward = [a, s, na, ns](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            const Tensor& A = t.value(a);
            const double sv = t.value(s)[0];
            if (na) {
                Tensor& dA = t.grad_ref(a.id);
                for (std::size_t i = 0; i < dC.size(); ++i) dA[i] += sv * dC[i];
            }
            if (ns) {
                double acc = 0.0;
                for (std::size_t i = 0; i < dC.size(); ++i) acc += dC[i] * A[i];
                t.grad_ref(s.id)[0] += acc;
            }
        };
    return Var{id};
}

Var Tape::emax_const(Var a, double c) {
    Tensor C = value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = std::max(C[i], c);
    const int id = push(std::move(C), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a, c](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            const Tensor& A = t.value(a);
            Tensor& dA = t.grad_ref(a.id);
            for (std::size_t i = 0; i < dC.size(); ++i)
                if (A[i] >= c) dA[i] += dC[i];
        };
    return Var{id};
}

Var Tape::emin_const(Var a, double c) {
    Tensor C = value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = std::min(C[i], c);
    const int id = push(std::move(C), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a, c](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            const Tensor& A = t.value(a);
            Tensor& dA = t.grad_ref(a.id);
            for (std::size_t i = 0; i < dC.size(); ++i)
                if (A[i] <= c) dA[i] += dC[i];
        };
    return Var{id};
}

Var Tape::relu(Var a) { return emax_const(a, 0.0); }

Var Tape::clamp01(Var a) { return emin_const(emax_const(a, 0.0), 1.0); }

Var Tape::abs(Var a) {
    Tensor C = value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = std::fabs(C[i]);
    const int id = push(std::move(C), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            const Tensor& A = t.value(a);
            Tensor& dA = t.grad_ref(a.id);
            for (std::size_t i = 0; i < dC.size(); ++i) {
                const double s = A[i] > 0.0 ? 1.0 : (A[i] < 0.0 ? -1.0 : 0.0);
                dA[i] += s * dC[i];
            }
        };
    return Var{id};
}

Var Tape::log(Var a) {
    Tensor C = value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = std::log(C[i]);
    const int id = push(std::move(C), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            const Tensor& A = t.value(a);
            Tensor& dA = t.grad_ref(a.id);
            for (std::size_t i = 0; i < dC.size(); ++i) dA[i] += dC[i] / A[i];
        };
    return Var{id};
}

Var Tape::exp(Var a) {
    Tensor C = value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = std::exp(C[i]);
    const int id = push(std::move(C), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            const Tensor& Y = t.slots_[self].value;
            Tensor& dA = t.grad_ref(a.id);
            for (std::size_t i = 0; i < dC.size(); ++i) dA[i] += dC[i] * Y[i];
        };
    return Var{id};
}

Var Tape::sqrt(Var a) {
    Tensor C = value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = std::sqrt(C[i]);
    const int id = push(std::move(C), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            const Tensor& Y = t.slots_[self].value;
            Tensor& dA = t.grad_ref(a.id);
            for (std::size_t i = 0; i < dC.size(); ++i) dA[i] += dC[i] * 0.5 / Y[i];
        };
    return Var{id};
}

Var Tape::sigmoid(Var a) {
    Tensor C = value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = 1.0 / (1.0 + std::exp(-C[i]));
    const int id = push(std::move(C), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            const Tensor& Y = t.slots_[self].value;
            Tensor& dA = t.grad_ref(a.id);
            for (std::size_t i = 0; i < dC.size(); ++i) dA[i] += dC[i] * Y[i] * (1.0 - Y[i]);
        };
    return Var{id};
}

Var Tape::gelu(Var a) {
    const Tensor& A = value(a);
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i)
        C[i] = 0.5 * A[i] * (1.0 + std::erf(A[i] / kSqrt2));
    const int id = push(std::move(C), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            const Tensor& A = t.value(a);
            Tensor& dA = t.grad_ref(a.id);
            for (std::size_t i = 0; i < dC.size(); ++i) {
                const double x = A[i];
                const double cdf = 0.5 * (1.0 + std::erf(x / kSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                dA[i] += dC[i] * (cdf + x * pdf);
            }
        };
    return Var{id};
}

// ----------------------------------------------------------------- reductions

Var Tape::sum(Var a) {
    const Tensor& A = value(a);
    double acc = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) acc += A[i];
    const int id = push(Tensor::scalar(acc), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a](Tape& t, int self) {
            const double g = t.slots_[self].grad[0];
            Tensor& dA = t.grad_ref(a.id);
            for (std::size_t i = 0; i < dA.size(); ++i) dA[i] += g;
        };
    return Var{id};
}

Var Tape::mean(Var a) {
    const Tensor& A = value(a);
    const double inv = 1.0 / static_cast<double>(A.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) acc += A[i];
    const int id = push(Tensor::scalar(acc * inv), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a, inv](Tape& t, int self) {
            const double g = t.slots_[self].grad[0] * inv;
            Tensor& dA = t.grad_ref(a.id);
            for (std::size_t i = 0; i < dA.size(); ++i) dA[i] += g;
        };
    return Var{id};
}

// ---------------------------------------------------------------------- shape

Var Tape::slice_rows(Var a, std::size_t r0, std::size_t r1) {
    const Tensor& A = value(a);
    if (r0 >= r1 || r1 > A.rows()) throw std::invalid_argument("slice_rows: bad range");
    Tensor C(r1 - r0, A.cols());
    for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = 0; c < A.cols(); ++c) C.at(r - r0, c) = A.at(r, c);
    const int id = push(std::move(C), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a, r0](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            Tensor& dA = t.grad_ref(a.id);
            for (std::size_t r = 0; r < dC.rows(); ++r)
                for (std::size_t c = 0; c < dC.cols(); ++c) dA.at(r + r0, c) += dC.at(r, c);
        };
    return Var{id};
}

Var Tape::slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Tensor& A = value(a);
    if (c0 >= c1 || c1 > A.cols()) throw std::invalid_argument("slice_cols: bad range");
    Tensor C(A.rows(), c1 - c0);
    for (std::size_t r = 0; r < A.rows(); ++r)
        for (std::size_t c = c0; c < c1; ++c) C.at(r, c - c0) = A.at(r, c);
    const int id = push(std::move(C), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a, c0](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            Tensor& dA = t.grad_ref(a.id);
            for (std::size_t r = 0; r < dC.rows(); ++r)
                for (std::size_t c = 0; c < dC.cols(); ++c) dA.at(r, c + c0) += dC.at(r, c);
        };
    return Var{id};
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    std::size_t rows = 0;
    const std::size_t cols = value(parts[0]).cols();
    bool any_grad = false;
    for (Var p : parts) {
        if (value(p).cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
        rows += value(p).rows();
        any_grad = any_grad || needs(p);
    }
    Tensor C(rows, cols);
    std::size_t off = 0;
    for (Var p : parts) {
        const Tensor& P = value(p);
        for (std::size_t r = 0; r < P.rows(); ++r)
            for (std::size_t c = 0; c < cols; ++c) C.at(off + r, c) = P.at(r, c);
        off += P.rows();
    }
    const int id = push(std::move(C), any_grad);
    if (slots_[id].needs_grad) {
        std::vector<Var> ps = parts;
        slots_[id].backward = [ps](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            std::size_t off = 0;
            for (Var p : ps) {
                const std::size_t pr = t.value(p).rows();
                if (t.needs(p)) {
                    Tensor& dP = t.grad_ref(p.id);
                    for (std::size_t r = 0; r < pr; ++r)
                        for (std::size_t c = 0; c < dC.cols(); ++c)
                            dP.at(r, c) += dC.at(off + r, c);
                }
                off += pr;
            }
        };
    }
    return Var{id};
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    const std::size_t rows = value(parts[0]).rows();
    std::size_t cols = 0;
    bool any_grad = false;
    for (Var p : parts) {
        if (value(p).rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
        cols += value(p).cols();
        any_grad = any_grad || needs(p);
    }
    Tensor C(rows, cols);
    std::size_t off = 0;
    for (Var p : parts) {
        const Tensor& P = value(p);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < P.cols(); ++c) C.at(r, off + c) = P.at(r, c);
        off += P.cols();
    }
    const int id = push(std::move(C), any_grad);
    if (slots_[id].needs_grad) {
        std::vector<Var> ps = parts;
        slots_[id].backward = [ps](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            std::size_t off = 0;
            for (Var p : ps) {
                const std::size_t pc = t.value(p).cols();
                if (t.needs(p)) {
                    Tensor& dP = t.grad_ref(p.id);
                    for (std::size_t r = 0; r < dC.rows(); ++r)
                        for (std::size_t c = 0; c < pc; ++c) dP.at(r, c) += dC.at(r, off + c);
                }
                off += pc;
            }
        };
    }
    return Var{id};
}

// ----------------------------------------------------------------- normalizers

Var Tape::softmax_rows(Var a) {
    const Tensor& A = value(a);
    Tensor C(A.rows(), A.cols());
    for (std::size_t r = 0; r < A.rows(); ++r) {
        double mx = A.at(r, 0);
        for (std::size_t c = 1; c < A.cols(); ++c) mx = std::max(mx, A.at(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < A.cols(); ++c) {
            const double e = std::exp(A.at(r, c) - mx);
            C.at(r, c) = e;
            z += e;
        }
        const double inv = 1.0 / z;
        for (std::size_t c = 0; c < A.cols(); ++c) C.at(r, c) *= inv;
    }
    const int id = push(std::move(C), needs(a));
    if (slots_[id].needs_grad)
        slots_[id].backward = [a](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            const Tensor& Y = t.slots_[self].value;
            Tensor& dA = t.grad_ref(a.id);
            for (std::size_t r = 0; r < Y.rows(); ++r) {
                double dot = 0.0;
                for (std::size_t c = 0; c < Y.cols(); ++c) dot += dC.at(r, c) * Y.at(r, c);
                for (std::size_t c = 0; c < Y.cols(); ++c)
                    dA.at(r, c) += Y.at(r, c) * (dC.at(r, c) - dot);
            }
        };
    return Var{id};
}

Var Tape::layer_norm_rows(Var x, Var gain, Var bias, double eps) {
    const Tensor& X = value(x);
    const Tensor& G = value(gain);
    const Tensor& B = value(bias);
    if (G.cols() != X.cols() || B.cols() != X.cols() || G.rows() != 1 || B.rows() != 1)
        throw std::invalid_argument("layer_norm_rows: gain/bias shape mismatch");
    const std::size_t n = X.cols();
    Tensor C(X.rows(), n);
    Tensor xhat(X.rows(), n);
    std::vector<double> inv_std(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) {
        double mu = 0.0;
        for (std::size_t c = 0; c < n; ++c) mu += X.at(r, c);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            const double d = X.at(r, c) - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        for (std::size_t c = 0; c < n; ++c) {
            const double h = (X.at(r, c) - mu) * is;
            xhat.at(r, c) = h;
            C.at(r, c) = G[c] * h + B[c];
        }
    }
    const bool nx = needs(x), ng = needs(gain), nb = needs(bias);
    const int id = push(std::move(C), nx || ng || nb);
    if (slots_[id].needs_grad)
        slots_[id].backward = [x, gain, bias, nx, ng, nb, xhat = std::move(xhat),
                               inv_std = std::move(inv_std)](Tape& t, int self) {
            const Tensor& dC = t.slots_[self].grad;
            const Tensor& G = t.value(gain);
            const std::size_t n = dC.cols();
            if (ng || nb) {
                for (std::size_t r = 0; r < dC.rows(); ++r)
                    for (std::size_t c = 0; c < n; ++c) {
                        if (ng) t.grad_ref(gain.id)[c] += dC.at(r, c) * xhat.at(r, c);
                        if (nb) t.grad_ref(bias.id)[c] += dC.at(r, c);
                    }
            }
            if (nx) {
                Tensor& dX = t.grad_ref(x.id);
                for (std::size_t r = 0; r < dC.rows(); ++r) {
                    double m1 = 0.0, m2 = 0.0;
                    for (std::size_t c = 0; c < n; ++c) {
                        const double gy = dC.at(r, c) * G[c];
                        m1 += gy;
                        m2 += gy * xhat.at(r, c);
                    }
                    m1 /= static_cast<double>(n);
                    m2 /= static_cast<double>(n);
                    for (std::size_t c = 0; c < n; ++c) {
                        const double gy = dC.at(r, c) * G[c];
                        dX.at(r, c) += (gy - m1 - xhat.at(r, c) * m2) * inv_std[r];
                    }
                }
            }
        };
    return Var{id};
}

// -------------------------------------------------------------- fused losses

Var Tape::focal_map_loss(Var logits, const Tensor& target, double alpha, double beta) {
    const Tensor& X = value(logits);
    if (!X.same_shape(target)) throw std::invalid_argument("focal_map_loss: shape mismatch");
    double n_pos = 0.0;
    double loss = 0.0;
    Tensor y(X.rows(), X.cols());
    for (std::size_t i = 0; i < X.size(); ++i) {
        double p = 1.0 / (1.0 + std::exp(-X[i]));
        p = std::min(std::max(p, 1e-12), 1.0 - 1e-12);
        y[i] = p;
        if (target[i] >= 1.0) {
            n_pos += 1.0;
            loss -= std::pow(1.0 - p, alpha) * std::log(p);
        } else {
            loss -= std::pow(1.0 - target[i], beta) * std::pow(p, alpha) * std::log(1.0 - p);
        }
    }
    const double inv_np = 1.0 / std::max(n_pos, 1.0);
    const int id = push(Tensor::scalar(loss * inv_np), needs(logits));
    if (slots_[id].needs_grad)
        slots_[id].backward = [logits, target, alpha, beta, y = std::move(y),
                               inv_np](Tape& t, int self) {
            const double g = t.slots_[self].grad[0] * inv_np;
            Tensor& dX = t.grad_ref(logits.id);
            for (std::size_t i = 0; i < dX.size(); ++i) {
                const double p = y[i];
                double dLdp;
                if (target[i] >= 1.0) {
                    dLdp = alpha * std::pow(1.0 - p, alpha - 1.0) * std::log(p) -
                           std::pow(1.0 - p, alpha) / p;
                } else {
                    dLdp = -std::pow(1.0 - target[i], beta) *
                           (alpha * std::pow(p, alpha - 1.0) * std::log(1.0 - p) -
                            std::pow(p, alpha) / (1.0 - p));
                }
                dX[i] += g * dLdp * p * (1.0 - p);
            }
        };
    return Var{id};
}

// ------------------------------------------------------------------- backward

void Tape::backward(Var scalar_loss) {
    if (!grad_enabled_) throw std::logic_error("backward on a no-grad tape");
    const Tensor& L = value(scalar_loss);
    if (L.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    grad_ref(scalar_loss.id)[0] += 1.0;
    for (int id = scalar_loss.id; id >= 0; --id) {
        Slot& s = slots_[id];
        if (s.backward && s.grad_alloc) s.backward(*this, id);
    }
}

void Tape::accumulate_param_grads() {
    for (auto& s : slots_) {
        if (s.param != nullptr && !s.param->frozen && s.grad_alloc)
            s.param->grad.add_inplace(s.grad);
    }
}

void Tape::export_param_grads(std::vector<std::pair<const Parameter*, Tensor>>& sink) const {
    for (const auto& s : slots_) {
        if (s.param != nullptr && !s.param->frozen && s.grad_alloc)
            sink.emplace_back(s.param, s.grad);
    }
}

void Tape::export_param_grads_indexed(std::vector<Tensor>& buffer) const {
    for (const auto& s : slots_) {
        if (s.param == nullptr || s.param->frozen || !s.grad_alloc) continue;
        Tensor& slot = buffer.at(s.param->index);
        if (slot.empty())
            slot = s.grad;
        else
            slot.add_inplace(s.grad);
    }
}

}  // namespace mpt
