// Copyright 2026 The Moldscan Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "moldscan/dataset_io.h"

#include <algorithm>
#include <fmt/format.h>
#include <set>

#include "moldscan/error.h"
#include "moldscan/json_schema.h"
#include "moldscan/util.h"

namespace moldscan {

namespace {

void dump_value(const Json& v, int indent, int decimals, std::string& out);

void newline(int indent, std::string& out) {
  out += '\n';
  out.append(static_cast<std::size_t>(indent) * 2, ' ');
}

bool all_scalars(const Json& array) {
  return std::all_of(array.begin(), array.end(),
                     [](const Json& e) { return !e.is_structured(); });
}

int decimals_for_key(const std::string& key, int inherited) {
  if (key == "bbox" || key == "origin") return 4;
  return inherited == 4 ? 4 : 6;
}

void dump_value(const Json& v, int indent, int decimals, std::string& out) {
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(indent + 1, out);
        out += Json(it.key()).dump();
        out += ": ";
        dump_value(it.value(), indent + 1, decimals_for_key(it.key(), decimals), out);
      }
      newline(indent, out);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      if (all_scalars(v)) {
        out += '[';
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (i) out += ", ";
          dump_value(v[i], indent, decimals, out);
        }
        out += ']';
        return;
      }
      out += '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        newline(indent + 1, out);
        dump_value(v[i], indent + 1, decimals, out);
      }
      newline(indent, out);
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      double d = v.get<double>();
      std::string s = fmt::format("{:.{}f}", d, decimals);
      // Never print a negative zero.
      if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
      out += s;
      return;
    }
    default:
      out += v.dump();
  }
}

}  // namespace

std::string canonical_dump(const Json& doc) {
  std::string out;
  dump_value(doc, 0, 6, out);
  out += '\n';
  return out;
}

Json box_to_json(const PixelBox& box) {
  return Json::array({box.x, box.y, box.w, box.h});
}

const ImageRecord* Dataset::find_image(ImageId id) const {
  for (const auto& img : images) {
    if (img.id == id) return &img;
  }
  return nullptr;
}

std::map<ImageId, std::vector<Annotation>> Dataset::annotations_by_image() const {
  std::map<ImageId, std::vector<Annotation>> out;
  for (const auto& a : annotations) out[a.image_id].push_back(a);
  return out;
}

std::vector<Annotation> filter_family(const std::vector<Annotation>& annotations,
                                      Family family) {
  std::vector<Annotation> out;
  for (const auto& a : annotations) {
    if (family_of(a.category) == family) out.push_back(a);
  }
  return out;
}

Json dataset_to_json(const Dataset& dataset) {
  Json doc = Json::object();
  Json images = Json::array();
  for (const auto& img : dataset.images) {
    Json j = {{"id", img.id},
              {"file_name", img.file_name},
              {"width", img.width},
              {"height", img.height}};
    if (img.source) {
      j["source"] = {{"drawing_id", img.source->drawing_id},
                     {"tile_index", img.source->tile_index},
                     {"origin", Json::array({img.source->x0, img.source->y0})}};
    }
    images.push_back(std::move(j));
  }
  Json categories = Json::array();
  for (Category c : kAllCategories) {
    Json group = Json::array();
    for (int r : rotation_group(c)) group.push_back(r);
    categories.push_back({{"id", category_id(c)},
                          {"name", category_name(c)},
                          {"family", family_name(family_of(c))},
                          {"rotation_group", group}});
  }
  Json annotations = Json::array();
  for (const auto& a : dataset.annotations) {
    annotations.push_back({{"id", a.id},
                           {"image_id", a.image_id},
                           {"category_id", category_id(a.category)},
                           {"bbox", box_to_json(a.box)},
                           {"rotation", a.rotation.degrees()}});
  }
  doc["images"] = std::move(images);
  doc["categories"] = std::move(categories);
  doc["annotations"] = std::move(annotations);
  return doc;
}

Dataset dataset_from_json(const Json& doc) {
  using schema::FieldPath;
  const FieldPath root;
  schema::require_object(doc, root);
  Dataset ds;

  const Json& images = schema::require_array(doc, "images", root);
  std::set<ImageId> image_ids;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const FieldPath p = root.key("images").index(i);
    const Json& j = images[i];
    schema::require_object(j, p);
    ImageRecord img;
    img.id = schema::require_int(j, "id", p);
    img.file_name = schema::require_string(j, "file_name", p);
    img.width = static_cast<int>(schema::require_int(j, "width", p));
    img.height = static_cast<int>(schema::require_int(j, "height", p));
    if (img.width < 1 || img.height < 1) {
      throw DataError(fmt::format("{}: image must be at least 1x1", p.str()));
    }
    if (j.contains("source")) {
      const FieldPath sp = p.key("source");
      const Json& s = j["source"];
      schema::require_object(s, sp);
      TileProvenance src;
      src.drawing_id = schema::require_int(s, "drawing_id", sp);
      src.tile_index = static_cast<int>(schema::require_int(s, "tile_index", sp));
      const auto origin = schema::require_numbers(s, "origin", 2, sp);
      src.x0 = static_cast<int>(origin[0]);
      src.y0 = static_cast<int>(origin[1]);
      img.source = src;
    }
    if (!image_ids.insert(img.id).second) {
      throw DataError(fmt::format("{}: duplicate image id {}", p.str(), img.id));
    }
    ds.images.push_back(std::move(img));
  }

  std::set<int> declared_categories;
  if (doc.contains("categories")) {
    const Json& cats = schema::require_array(doc, "categories", root);
    for (std::size_t i = 0; i < cats.size(); ++i) {
      const FieldPath p = root.key("categories").index(i);
      schema::require_object(cats[i], p);
      const int id = static_cast<int>(schema::require_int(cats[i], "id", p));
      const std::string name = schema::require_string(cats[i], "name", p);
      const auto known = category_from_id(id);
      if (!known || category_name(*known) != name) {
        throw DataError(fmt::format("{}: unknown category {} \"{}\"", p.str(), id, name));
      }
      declared_categories.insert(id);
    }
  }

  const Json& anns = schema::require_array(doc, "annotations", root);
  std::vector<std::string> broken;
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const FieldPath p = root.key("annotations").index(i);
    const Json& j = anns[i];
    schema::require_object(j, p);
    const std::int64_t id = schema::require_int(j, "id", p);
    const ImageId image_id = schema::require_int(j, "image_id", p);
    const int cat_id = static_cast<int>(schema::require_int(j, "category_id", p));
    const auto bbox = schema::require_numbers(j, "bbox", 4, p);
    const int rotation = static_cast<int>(schema::require_int(j, "rotation", p));

    const ImageRecord* img = ds.find_image(image_id);
    if (!img) {
      broken.push_back(fmt::format("annotation {} references missing image {}", id, image_id));
      continue;
    }
    const auto cat = category_from_id(cat_id);
    if (!cat || (!declared_categories.empty() && !declared_categories.count(cat_id))) {
      broken.push_back(
          fmt::format("annotation {} references missing category {}", id, cat_id));
      continue;
    }
    const PixelBox box{bbox[0], bbox[1], bbox[2], bbox[3]};
    if (!box.valid() || !box_within(box, img->width, img->height)) {
      throw DataError(fmt::format("{}.bbox: box [{}, {}, {}, {}] outside image {} ({}x{})",
                                  p.str(), box.x, box.y, box.w, box.h, image_id,
                                  img->width, img->height));
    }
    Annotation a;
    a.id = id;
    a.image_id = image_id;
    a.box = box;
    a.category = *cat;
    try {
      a.rotation = Rotation::normalized(*cat, rotation);
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}.rotation: {}", p.str(), e.what()));
    }
    ds.annotations.push_back(a);
  }
  if (!broken.empty()) {
    std::string msg = "referential integrity violated:";
    for (const auto& b : broken) msg += "\n  " + b;
    throw DataError(msg);
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  Json doc;
  try {
    doc = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return dataset_from_json(doc);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_file_atomic(path, canonical_dump(dataset_to_json(dataset)));
}

}  // namespace moldscan
