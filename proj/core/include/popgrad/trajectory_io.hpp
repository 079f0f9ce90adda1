#pragma once

#include "popgrad/dynamics.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>

namespace popgrad {

// CSV header: time,loss,grad_norm,H,Z,V,kappa_max,min_wnorm,max_wnorm,max_theta,balance_ratio
// Every number is printed in shortest round-trip form so output files are
// byte-stable across platforms; undefined kappa_max / balance_ratio are
// emitted as empty fields.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

// Full parameter snapshots as a JSON array of {time, neurons}.
nlohmann::json snapshots_to_json(const Trajectory& traj);
void write_snapshots_json(const std::string& path, const Trajectory& traj);

}  // namespace popgrad
