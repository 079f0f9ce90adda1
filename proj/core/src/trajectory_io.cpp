#include "popgrad/trajectory_io.hpp"

#include "popgrad/util.hpp"

#include <fstream>
#include <ostream>

namespace popgrad {

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "time,loss,grad_norm,H,Z,V,kappa_max,min_wnorm,max_wnorm,max_theta,balance_ratio\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        os << format_double(traj.times[k]) << ',' << format_double(traj.loss[k]) << ','
           << format_double(traj.grad_norm[k]) << ',' << format_double(traj.H[k]) << ','
           << format_double(traj.Z[k]) << ',' << format_double(traj.V[k]) << ',';
        if (traj.kappa_max[k]) os << format_double(*traj.kappa_max[k]);
        os << ',' << format_double(traj.min_wnorm[k]) << ','
           << format_double(traj.max_wnorm[k]) << ',' << format_double(traj.max_theta[k])
           << ',';
        if (traj.balance_ratio[k] && std::isfinite(*traj.balance_ratio[k]))
            os << format_double(*traj.balance_ratio[k]);
        os << '\n';
    }
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + path);
    write_trajectory_csv(f, traj);
}

nlohmann::json snapshots_to_json(const Trajectory& traj) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t k = 0; k < traj.size(); ++k) {
        nlohmann::json neurons = nlohmann::json::array();
        const auto& m = traj.snapshots[k].neurons;
        for (int i = 0; i < m.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
            neurons.push_back(std::move(row));
        }
        arr.push_back({{"time", traj.times[k]}, {"neurons", std::move(neurons)}});
    }
    return arr;
}

void write_snapshots_json(const std::string& path, const Trajectory& traj) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + path);
    f << snapshots_to_json(traj).dump(1) << '\n';
}

}  // namespace popgrad
