#include "causalhbm/dataset.hpp"

namespace causalhbm {

std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw SchemaError("unknown split: " + s);
}

namespace {

Eigen::MatrixXd stack_rows(const Task& t, bool include_query) {
    const int k = static_cast<int>(t.support_x.cols());
    const int m_s = static_cast<int>(t.support_x.rows());
    const int m_q = include_query ? static_cast<int>(t.query_x.rows()) : 0;
    Eigen::MatrixXd rows(m_s + m_q, k + 1);
    rows.block(0, 0, m_s, k) = t.support_x;
    rows.block(0, k, m_s, 1) = t.support_y;
    if (m_q > 0) {
        rows.block(m_s, 0, m_q, k) = t.query_x;
        rows.block(m_s, k, m_q, 1) = t.query_y();
    }
    return rows;
}

}  // namespace

Eigen::MatrixXd distance_rows(const Task& t) {
    return stack_rows(t, t.split == Split::Train);
}

Eigen::MatrixXd distance_rows_tagged(const Task& t, int tag) {
    const Eigen::MatrixXd all = distance_rows(t);
    const int m_s = static_cast<int>(t.support_x.rows());
    std::vector<int> keep;
    for (int r = 0; r < all.rows(); ++r) {
        const int row_tag = r < m_s ? t.support_tag(r) : t.query_tag(r - m_s);
        if (row_tag == tag) keep.push_back(r);
    }
    Eigen::MatrixXd out(static_cast<int>(keep.size()), all.cols());
    for (int r = 0; r < out.rows(); ++r) out.row(r) = all.row(keep[r]);
    return out;
}

}  // namespace causalhbm
