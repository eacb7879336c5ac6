// SPDX-License-Identifier: Apache-2.0
//
// thzsim: multi-user terahertz link-level simulator and semantic beamforming toolkit
// Copyright (C) 2026 The thzsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "thzsim/model_io.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace thzsim {
namespace {

using nlohmann::json;

std::string num(double v)
{
    if (!std::isfinite(v))
        throw std::invalid_argument("model_to_json: non-finite value");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename Fn>
std::string list(Eigen::Index n, Fn&& item)
{
    std::string s = "[";
    for (Eigen::Index i = 0; i < n; ++i)
    {
        if (i)
            s += ", ";
        s += item(i);
    }
    return s + "]";
}

std::string vec_json(const Vec& v)
{
    return list(v.size(), [&](Eigen::Index i) { return num(v(i)); });
}

std::string ints_json(const std::vector<int>& v)
{
    return list(static_cast<Eigen::Index>(v.size()),
                [&](Eigen::Index i) { return std::to_string(v[static_cast<std::size_t>(i)]); });
}

// Rows of the matrix, each as a JSON list.
std::string rows_json(const Mat& m)
{
    return list(m.rows(), [&](Eigen::Index r) { return vec_json(m.row(r).transpose()); });
}

Vec vec_from(const json& j, Eigen::Index n, const char* what)
{
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
        throw std::invalid_argument(std::string("cgm-model/v1: '") + what + "' must be a list of length " +
                                    std::to_string(n));
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        if (!j[static_cast<std::size_t>(i)].is_number())
            throw std::invalid_argument(std::string("cgm-model/v1: '") + what + "' must contain numbers");
        v(i) = j[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

Mat mat_from(const json& j, Eigen::Index rows, Eigen::Index cols, const char* what)
{
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
        throw std::invalid_argument(std::string("cgm-model/v1: '") + what + "' must have " + std::to_string(rows) +
                                    " rows");
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        m.row(r) = vec_from(j[static_cast<std::size_t>(r)], cols, what).transpose();
    return m;
}

std::vector<int> flags_from(const json& j, std::size_t n, const char* what)
{
    if (!j.is_array() || j.size() != n)
        throw std::invalid_argument(std::string("cgm-model/v1: '") + what + "' must be a list of length " +
                                    std::to_string(n));
    std::vector<int> out;
    for (const auto& x : j)
    {
        if (!x.is_number_integer())
            throw std::invalid_argument(std::string("cgm-model/v1: '") + what + "' must contain 0/1 integers");
        out.push_back(x.get<int>());
    }
    return out;
}

const json& field(const json& doc, const char* name)
{
    if (!doc.contains(name))
        throw std::invalid_argument(std::string("cgm-model/v1: missing field '") + name + "'");
    return doc.at(name);
}

}  // namespace

std::string model_to_json(const CausalModelBundle& b)
{
    b.graph.validate();
    b.transition.validate(b.graph);
    b.codebook.validate();
    const int s = b.graph.num_nodes();
    std::ostringstream o;
    o << "{\n";
    o << "  \"schema\": \"" << kModelSchema << "\",\n";
    o << "  \"D\": " << s << ",\n";
    o << "  \"semantic_dim\": " << b.semantic_dim << ",\n";
    o << "  \"M_adj\": " << list(s, [&](Eigen::Index r) {
        return list(s, [&](Eigen::Index c) { return std::to_string(b.graph.adjacency(r, c)); });
    }) << ",\n";
    o << "  \"intervention_flags\": " << ints_json(b.graph.intervention_flags) << ",\n";
    o << "  \"beam_intervention_flags\": " << ints_json(b.graph.beam_intervention_flags) << ",\n";
    if (b.graph.edge_posterior.size() != 0)
        o << "  \"edge_posterior\": " << rows_json(b.graph.edge_posterior) << ",\n";
    if (b.graph.intervention_posterior.size() != 0)
        o << "  \"intervention_posterior\": " << vec_json(b.graph.intervention_posterior) << ",\n";
    const auto& t = b.transition;
    // Per-node weight vectors: entry i of node j's vector is the weight of parent i.
    o << "  \"weights\": " << rows_json(t.weights.transpose()) << ",\n";
    o << "  \"bias\": " << vec_json(t.bias) << ",\n";
    o << "  \"noise_variances\": " << vec_json(t.noise_variance) << ",\n";
    o << "  \"intervention_shift\": " << vec_json(t.intervention_shift) << ",\n";
    o << "  \"initial_mean\": " << vec_json(t.initial_mean) << ",\n";
    o << "  \"initial_variance\": " << vec_json(t.initial_variance) << ",\n";
    o << "  \"observation_variance\": " << num(t.observation_variance) << ",\n";
    const auto m = b.codebook.dim();
    if (b.codebook.id == "dft")
    {
        o << "  \"codebook\": {\"id\": \"dft\", \"M\": " << m << ", \"size\": " << b.codebook.size() << "},\n";
    }
    else
    {
        o << "  \"codebook\": {\"id\": \"explicit\", \"M\": " << m << ", \"size\": " << b.codebook.size()
          << ", \"codewords\": "
          << list(b.codebook.size(), [&](Eigen::Index c) {
                 const CVec& w = b.codebook.codewords[static_cast<std::size_t>(c)];
                 return list(m, [&](Eigen::Index i) {
                     return "[" + num(w(i).real()) + ", " + num(w(i).imag()) + "]";
                 });
             })
          << "},\n";
    }
    o << "  \"codeword_posterior\": " << rows_json(b.codeword_posterior.transpose()) << "\n";
    o << "}\n";
    return o.str();
}

CausalModelBundle model_from_json(const std::string& text)
{
    json doc;
    try
    {
        doc = json::parse(text);
    }
    catch (const json::parse_error& e)
    {
        throw std::invalid_argument(std::string("cgm-model/v1: malformed document: ") + e.what());
    }
    if (!doc.is_object())
        throw std::invalid_argument("cgm-model/v1: document must be an object");
    const json& schema = field(doc, "schema");
    if (!schema.is_string() || schema.get<std::string>() != kModelSchema)
        throw std::invalid_argument("cgm-model/v1: unsupported schema string");
    const json& jd = field(doc, "D");
    if (!jd.is_number_integer() || jd.get<int>() < 1)
        throw std::invalid_argument("cgm-model/v1: 'D' must be a positive integer");
    const int s = jd.get<int>();

    CausalModelBundle b;
    const json& sd = field(doc, "semantic_dim");
    if (!sd.is_number_integer() || sd.get<int>() < 1 || sd.get<int>() > s)
        throw std::invalid_argument("cgm-model/v1: 'semantic_dim' must lie in [1, D]");
    b.semantic_dim = sd.get<int>();

    const json& adj = field(doc, "M_adj");
    if (!adj.is_array() || static_cast<int>(adj.size()) != s)
        throw std::invalid_argument("cgm-model/v1: 'M_adj' must be D x D");
    b.graph.adjacency.resize(s, s);
    for (int r = 0; r < s; ++r)
    {
        const auto row = flags_from(adj[static_cast<std::size_t>(r)], static_cast<std::size_t>(s), "M_adj");
        for (int c = 0; c < s; ++c)
            b.graph.adjacency(r, c) = row[static_cast<std::size_t>(c)];
    }
    b.graph.intervention_flags = flags_from(field(doc, "intervention_flags"), static_cast<std::size_t>(s),
                                            "intervention_flags");
    const json& bf = field(doc, "beam_intervention_flags");
    b.graph.beam_intervention_flags = flags_from(bf, bf.is_array() ? bf.size() : 0, "beam_intervention_flags");
    if (doc.contains("edge_posterior"))
        b.graph.edge_posterior = mat_from(doc["edge_posterior"], s, s, "edge_posterior");
    if (doc.contains("intervention_posterior"))
        b.graph.intervention_posterior = vec_from(doc["intervention_posterior"], s, "intervention_posterior");
    b.graph.validate();

    auto& t = b.transition;
    t.weights = mat_from(field(doc, "weights"), s, s, "weights").transpose();
    t.bias = vec_from(field(doc, "bias"), s, "bias");
    t.noise_variance = vec_from(field(doc, "noise_variances"), s, "noise_variances");
    t.intervention_shift = vec_from(field(doc, "intervention_shift"), s, "intervention_shift");
    t.initial_mean = vec_from(field(doc, "initial_mean"), s, "initial_mean");
    t.initial_variance = vec_from(field(doc, "initial_variance"), s, "initial_variance");
    const json& ov = field(doc, "observation_variance");
    if (!ov.is_number())
        throw std::invalid_argument("cgm-model/v1: 'observation_variance' must be a number");
    t.observation_variance = ov.get<double>();
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j)
            if (b.graph.adjacency(i, j) == 0 && t.weights(i, j) != 0.0)
                throw std::invalid_argument("cgm-model/v1: nonzero weight on a missing edge");
    t.validate(b.graph);

    const json& cb = field(doc, "codebook");
    if (!cb.is_object())
        throw std::invalid_argument("cgm-model/v1: 'codebook' must be an object");
    const json& id = field(cb, "id");
    const json& jm = field(cb, "M");
    const json& jsize = field(cb, "size");
    if (!id.is_string() || !jm.is_number_integer() || !jsize.is_number_integer() || jm.get<int>() < 1 ||
        jsize.get<int>() < 1)
        throw std::invalid_argument("cgm-model/v1: codebook needs string 'id' and positive 'M', 'size'");
    const int m = jm.get<int>();
    const int size = jsize.get<int>();
    if (id.get<std::string>() == "dft")
    {
        if (size != m)
            throw std::invalid_argument("cgm-model/v1: the dft codebook is square (size == M)");
        b.codebook = BeamCodebook::dft(m);
    }
    else if (id.get<std::string>() == "explicit")
    {
        const json& words = field(cb, "codewords");
        if (!words.is_array() || static_cast<int>(words.size()) != size)
            throw std::invalid_argument("cgm-model/v1: 'codewords' must list 'size' codewords");
        b.codebook.id = "explicit";
        for (const auto& w : words)
        {
            const Mat ri = mat_from(w, m, 2, "codewords");
            CVec c(m);
            for (int i = 0; i < m; ++i)
                c(i) = cd(ri(i, 0), ri(i, 1));
            b.codebook.codewords.push_back(c);
        }
    }
    else
    {
        throw std::invalid_argument("cgm-model/v1: unknown codebook id '" + id.get<std::string>() + "'");
    }
    b.codebook.validate();

    b.codeword_posterior = mat_from(field(doc, "codeword_posterior"), b.semantic_dim, size, "codeword_posterior")
                               .transpose();
    for (int j = 0; j < b.semantic_dim; ++j)
    {
        if ((b.codeword_posterior.col(j).array() < 0.0).any() ||
            std::abs(b.codeword_posterior.col(j).sum() - 1.0) > 1e-9)
            throw std::invalid_argument("cgm-model/v1: codeword posterior column " + std::to_string(j) +
                                        " is not normalized");
    }
    return b;
}

void export_model(const CausalModelBundle& bundle, const std::string& path)
{
    const std::string text = model_to_json(bundle);
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("export_model: cannot open " + path);
    f << text;
    if (!f)
        throw std::runtime_error("export_model: write failed for " + path);
}

CausalModelBundle load_trained_model(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("load_trained_model: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return model_from_json(ss.str());
}

CausalModelBundle default_model(int nodes, int semantic_dim, int num_antennas)
{
    if (semantic_dim < 1 || semantic_dim > nodes)
        throw std::invalid_argument("default_model: semantic_dim must lie in [1, nodes]");
    CausalModelBundle b;
    b.graph = empty_graph(nodes);
    b.graph.beam_intervention_flags.assign(static_cast<std::size_t>(semantic_dim), 0);
    b.transition.weights = Mat::Zero(nodes, nodes);
    b.transition.bias = Vec::Zero(nodes);
    b.transition.noise_variance = Vec::Ones(nodes);
    b.transition.intervention_shift = Vec::Constant(nodes, 2.0);
    b.transition.initial_mean = Vec::Zero(nodes);
    b.transition.initial_variance = Vec::Ones(nodes);
    b.semantic_dim = semantic_dim;
    b.codebook = BeamCodebook::dft(num_antennas);
    b.codeword_posterior = Mat::Constant(num_antennas, semantic_dim, 1.0 / num_antennas);
    return b;
}

}  // namespace thzsim
