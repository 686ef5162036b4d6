#pragma once

#include <cstdint>
#include <vector>

#include "slimkit/model.hpp"

namespace slimkit {

struct DistillKnobs {
  std::vector<std::size_t> student_spec;  // hidden layer sizes, e.g. {16, 8}
  double temperature = 1.0;               // > 0
  double loss_weight = 0.5;               // in [0,1]
};

// (1 - loss_weight) * CrossEntropy(student_logits, labels)
//   + loss_weight * KL(softmax(student/T), softmax(teacher/T)),
// batch-averaged. No T^2 rescaling of the KL term.
double kd_loss(const Matrix& student_logits, const Matrix& teacher_logits,
               const std::vector<int>& labels, double temperature, double loss_weight);

// d(kd_loss)/d(student_logits); the training loop backpropagates from here.
Matrix kd_loss_logit_grad(const Matrix& student_logits, const Matrix& teacher_logits,
                          const std::vector<int>& labels, double temperature,
                          double loss_weight);

// Trains an existing student against a frozen teacher. ConfigError when the
// output dims disagree.
Model train_student(const Model& teacher, Model student, const DistillKnobs& knobs,
                    const Dataset& train, int epochs, double lr, int batch_size = 32);

// Builds a student per student_spec (seeded) and distills the teacher into it.
// epochs == 0 returns the freshly initialized student. The teacher is never
// modified.
Model distill(const Model& teacher, const DistillKnobs& knobs, const Dataset& train,
              int epochs, double lr, std::uint64_t seed, int batch_size = 32);

}  // namespace slimkit
