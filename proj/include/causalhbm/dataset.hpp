#pragma once

#include <Eigen/Core>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "causalhbm/errors.hpp"

namespace causalhbm {

enum class Split { Train, Val, Test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

// Counts reads of query labels, keyed by task id. Attached by tests (and the
// leakage checks) to prove that training and distance code never touch the
// query labels of held-out tasks.
struct QueryLabelLog {
    std::map<int, long> reads;
};

// One task: labelled samples split into support and query folds. The
// intervention tag records which variable was intervened for a sample
// (-1 for purely observational rows).
class Task {
  public:
    int id = 0;
    Split split = Split::Train;
    Eigen::MatrixXd support_x;  // m_s x K
    Eigen::VectorXd support_y;
    Eigen::VectorXi support_tag;
    Eigen::MatrixXd query_x;  // m_q x K
    Eigen::VectorXi query_tag;

    const Eigen::VectorXd& query_y() const {
        if (log_) ++log_->reads[id];
        return query_y_;
    }
    void set_query_y(Eigen::VectorXd y) { query_y_ = std::move(y); }
    void attach_query_log(std::shared_ptr<QueryLabelLog> log) { log_ = std::move(log); }

  private:
    Eigen::VectorXd query_y_;
    std::shared_ptr<QueryLabelLog> log_;
};

struct Dataset {
    int n_features = 0;  // K
    std::vector<Task> tasks;

    std::vector<int> task_indices(Split s) const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(tasks.size()); ++i) {
            if (tasks[i].split == s) out.push_back(i);
        }
        return out;
    }

    void attach_query_log(const std::shared_ptr<QueryLabelLog>& log) {
        for (auto& t : tasks) t.attach_query_log(log);
    }
};

// Rows available to distance computations: all labelled samples for training
// tasks, support-only for held-out tasks (their query labels must not leak).
// Each row is the concatenated (x, y) sample.
Eigen::MatrixXd distance_rows(const Task& t);

// Same, restricted to samples carrying the given intervention tag.
Eigen::MatrixXd distance_rows_tagged(const Task& t, int tag);

}  // namespace causalhbm
