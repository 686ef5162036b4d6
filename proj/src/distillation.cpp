#include "slimkit/distillation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slimkit/errors.hpp"
#include "slimkit/train.hpp"

namespace slimkit {

namespace {

void check_kd_inputs(const Matrix& student, const Matrix& teacher,
                     const std::vector<int>& labels, double temperature, double loss_weight) {
  if (!same_shape(student, teacher)) {
    throw StructuralError("kd_loss: student/teacher logit shapes differ");
  }
  if (student.rows != labels.size()) {
    throw StructuralError("kd_loss: label count differs from batch size");
  }
  if (temperature <= 0.0) throw DomainError("kd_loss: temperature must be positive");
  if (loss_weight < 0.0 || loss_weight > 1.0) {
    throw DomainError("kd_loss: loss weight outside [0,1]");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= student.cols) {
      throw StructuralError("kd_loss: label outside [0, classes)");
    }
  }
}

std::vector<double> row_of(const Matrix& m, std::size_t i) {
  std::vector<double> out(m.cols);
  for (std::size_t j = 0; j < m.cols; ++j) out[j] = m(i, j);
  return out;
}

double cross_entropy_row(const std::vector<double>& logits, int label) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  return mx + std::log(sum) - logits[static_cast<std::size_t>(label)];
}

}  // namespace

double kd_loss(const Matrix& student_logits, const Matrix& teacher_logits,
               const std::vector<int>& labels, double temperature, double loss_weight) {
  check_kd_inputs(student_logits, teacher_logits, labels, temperature, loss_weight);
  const std::size_t n = student_logits.rows;
  double ce = 0.0, kd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> s = row_of(student_logits, i);
    ce += cross_entropy_row(s, labels[i]);
    kd += kl_div(softmax_temp(s, temperature),
                 softmax_temp(row_of(teacher_logits, i), temperature));
  }
  const double dn = static_cast<double>(n);
  return (1.0 - loss_weight) * (ce / dn) + loss_weight * (kd / dn);
}

Matrix kd_loss_logit_grad(const Matrix& student_logits, const Matrix& teacher_logits,
                          const std::vector<int>& labels, double temperature,
                          double loss_weight) {
  check_kd_inputs(student_logits, teacher_logits, labels, temperature, loss_weight);
  const std::size_t n = student_logits.rows;
  const std::size_t c = student_logits.cols;
  const double dn = static_cast<double>(n);
  Matrix grad(n, c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> s = row_of(student_logits, i);
    const std::vector<double> p1 = softmax_temp(s, 1.0);
    // Cross-entropy part: (softmax(s) - onehot) / n.
    for (std::size_t j = 0; j < c; ++j) {
      grad(i, j) += (1.0 - loss_weight) *
                    (p1[j] - (static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0)) / dn;
    }
    if (loss_weight == 0.0) continue;
    // KL(p || q) with p = softmax(s/T):
    //   d/ds_j = (1/T) * p_j * (log(p_j/q_j) - KL).
    const std::vector<double> p = softmax_temp(s, temperature);
    const std::vector<double> q = softmax_temp(row_of(teacher_logits, i), temperature);
    std::vector<double> log_ratio(c);
    double kl = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      log_ratio[j] = std::log(std::max(p[j], 1e-300)) - std::log(std::max(q[j], 1e-12));
      kl += p[j] * log_ratio[j];
    }
    for (std::size_t j = 0; j < c; ++j) {
      grad(i, j) += loss_weight * p[j] * (log_ratio[j] - kl) / (temperature * dn);
    }
  }
  return grad;
}

Model train_student(const Model& teacher, Model student, const DistillKnobs& knobs,
                    const Dataset& train, int epochs, double lr, int batch_size) {
  if (teacher.output_dim != student.output_dim) {
    throw ConfigError("distill: teacher output dim " + std::to_string(teacher.output_dim) +
                      " differs from student output dim " + std::to_string(student.output_dim));
  }
  if (teacher.input_dim != student.input_dim) {
    throw ConfigError("distill: teacher and student input dims differ");
  }
  if (epochs < 0) throw DomainError("distill: negative epoch count");
  if (epochs == 0) return student;
  if (train.size() == 0) throw DomainError("distill: empty training set");
  if (batch_size < 1) throw DomainError("distill: batch size must be >= 1");

  const std::size_t n = train.size();
  const std::size_t bs = static_cast<std::size_t>(batch_size);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t stop = std::min(n, start + bs);
      Matrix bx(stop - start, train.inputs.cols);
      std::vector<int> by(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        for (std::size_t j = 0; j < train.inputs.cols; ++j) {
          bx(i - start, j) = train.inputs(i, j);
        }
        by[i - start] = train.labels[i];
      }
      // Teacher logits are recomputed per batch; the teacher stays frozen.
      const Matrix teacher_logits = forward(teacher, bx);
      const Matrix student_logits = forward(student, bx);
      const Matrix dlogits = kd_loss_logit_grad(student_logits, teacher_logits, by,
                                                knobs.temperature, knobs.loss_weight);
      const Gradients grads = backward_from_logit_grad(student, bx, dlogits);
      student = sgd_step(std::move(student), grads, lr);
    }
  }
  return student;
}

Model distill(const Model& teacher, const DistillKnobs& knobs, const Dataset& train,
              int epochs, double lr, std::uint64_t seed, int batch_size) {
  if (knobs.temperature <= 0.0) throw DomainError("distill: temperature must be positive");
  if (knobs.loss_weight < 0.0 || knobs.loss_weight > 1.0) {
    throw DomainError("distill: loss weight outside [0,1]");
  }
  for (std::size_t h : knobs.student_spec) {
    if (h < 1) throw DomainError("distill: student layer sizes must be >= 1");
  }
  Model student = make_model(teacher.input_dim, knobs.student_spec, teacher.output_dim, seed);
  return train_student(teacher, std::move(student), knobs, train, epochs, lr, batch_size);
}

}  // namespace slimkit
