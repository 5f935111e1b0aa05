#pragma once

#include <string>

#include <Eigen/Core>

#include "hsforest/sampler.hpp"

namespace hsforest {

// Dataset CSV: header `time,status,treatment,x1,...,xp`, one row per subject.
// Doubles are written with 17 significant digits so a read/write cycle is exact.
// Throws InputError naming the 1-based data row on malformed input.
Dataset read_dataset_csv(const std::string& path, OutcomeKind outcome = OutcomeKind::Survival);
void write_dataset_csv(const std::string& path, const Dataset& data);
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text, OutcomeKind outcome = OutcomeKind::Survival);

// Truth sidecar: first line `# ate=<value>`, then a `cate` column.
void write_truth_csv(const std::string& path, const Eigen::VectorXd& cate, double ate);
Eigen::VectorXd read_truth_csv(const std::string& path, double* ate = nullptr);

// One row per retained draw: ate, sigma2, cate_1..cate_n (causal fits) or sigma2 only.
void write_draws_csv(const std::string& path, const PosteriorDraws& draws);

// printf("%.17g")
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace hsforest
