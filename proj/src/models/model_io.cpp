#include "stamp/models/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace stamp::models {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  return in;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

void write_mesh(const Mesh& mesh, const std::string& vertices_path,
                const std::string& triangles_path) {
  auto vout = open_out(vertices_path);
  vout << "x,y\n";
  for (int v = 0; v < mesh.n_vertices(); ++v)
    vout << fmt(mesh.x[v]) << "," << fmt(mesh.y[v]) << "\n";
  auto tout = open_out(triangles_path);
  tout << "a,b,c\n";
  for (auto& t : mesh.triangles) tout << t[0] << "," << t[1] << "," << t[2] << "\n";
}

Mesh read_mesh(const std::string& vertices_path, const std::string& triangles_path) {
  Mesh mesh;
  {
    auto in = open_in(vertices_path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto cells = split(line);
      if (cells.size() != 2) throw IoError("bad vertex row in " + vertices_path);
      mesh.x.push_back(std::stod(cells[0]));
      mesh.y.push_back(std::stod(cells[1]));
    }
  }
  {
    auto in = open_in(triangles_path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto cells = split(line);
      if (cells.size() != 3) throw IoError("bad triangle row in " + triangles_path);
      mesh.triangles.push_back(
          {std::stoi(cells[0]), std::stoi(cells[1]), std::stoi(cells[2])});
    }
  }
  mesh.validate();
  return mesh;
}

void write_path_csv(const std::vector<std::vector<double>>& path, const std::string& file) {
  auto out = open_out(file);
  out << "t,node,value\n";
  for (size_t t = 0; t < path.size(); ++t)
    for (size_t j = 0; j < path[t].size(); ++j)
      out << t << "," << j << "," << fmt(path[t][j]) << "\n";
}

std::vector<std::vector<double>> read_path_csv(const std::string& file) {
  auto in = open_in(file);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> path;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != 3) throw IoError("bad path row in " + file);
    size_t t = std::stoul(cells[0]);
    size_t j = std::stoul(cells[1]);
    if (path.size() <= t) path.resize(t + 1);
    if (path[t].size() <= j) path[t].resize(j + 1, 0.0);
    path[t][j] = std::stod(cells[2]);
  }
  return path;
}

void write_events(const EventData& data, const std::string& file) {
  auto out = open_out(file);
  switch (data.kind) {
    case ObsModel::Kind::Gaussian:
      out << "t,node,value\n";
      for (int t = 0; t < data.T; ++t)
        for (auto& [node, value] : data.gaussian_obs[t])
          out << t << "," << node << "," << fmt(value) << "\n";
      break;
    case ObsModel::Kind::PoissonCounts:
      out << "t,node,count\n";
      for (int t = 0; t < data.T; ++t)
        for (size_t j = 0; j < data.counts[t].size(); ++j)
          out << t << "," << j << "," << data.counts[t][j] << "\n";
      break;
    case ObsModel::Kind::Lgcp:
      out << "t,x,y\n";
      for (auto& ev : data.events)
        out << ev.t << "," << fmt(ev.x) << "," << fmt(ev.y) << "\n";
      break;
  }
}

EventData read_events(ObsModel::Kind kind, const std::string& file) {
  auto in = open_in(file);
  EventData data;
  data.kind = kind;
  std::string line;
  std::getline(in, line);
  int max_t = -1;
  std::vector<std::tuple<int, int, double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != 3) throw IoError("bad event row in " + file);
    if (kind == ObsModel::Kind::Lgcp) {
      EventData::Event ev{std::stoi(cells[0]), std::stod(cells[1]), std::stod(cells[2])};
      max_t = std::max(max_t, ev.t);
      data.events.push_back(ev);
    } else {
      rows.emplace_back(std::stoi(cells[0]), std::stoi(cells[1]), std::stod(cells[2]));
      max_t = std::max(max_t, std::get<0>(rows.back()));
    }
  }
  data.T = max_t + 1;
  if (kind == ObsModel::Kind::Gaussian) {
    data.gaussian_obs.assign(data.T, {});
    for (auto& [t, node, value] : rows) data.gaussian_obs[t].push_back({node, value});
  } else if (kind == ObsModel::Kind::PoissonCounts) {
    int n = 0;
    for (auto& [t, node, value] : rows) n = std::max(n, node + 1);
    data.counts.assign(data.T, std::vector<long>(n, 0));
    for (auto& [t, node, value] : rows) data.counts[t][node] = long(value);
  }
  return data;
}

}  // namespace stamp::models
