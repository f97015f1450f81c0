#pragma once

#include <string>

#include "stamp/models/model_spec.hpp"

namespace stamp::models {

// CSV formats (all values printed with %.17g so round-trips are exact):
//   mesh:          vertices "x,y" / triangles "a,b,c"
//   latent path:   "t,node,value"
//   gaussian obs:  "t,node,value"
//   poisson obs:   "t,node,count"
//   lgcp events:   "t,x,y"
void write_mesh(const Mesh& mesh, const std::string& vertices_path,
                const std::string& triangles_path);
Mesh read_mesh(const std::string& vertices_path, const std::string& triangles_path);

void write_path_csv(const std::vector<std::vector<double>>& path, const std::string& file);
std::vector<std::vector<double>> read_path_csv(const std::string& file);

void write_events(const EventData& data, const std::string& file);
EventData read_events(ObsModel::Kind kind, const std::string& file);

}  // namespace stamp::models
