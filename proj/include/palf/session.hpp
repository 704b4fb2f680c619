#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "palf/types.hpp"

namespace palf {

enum class BoxStatus { pre_annotated, confirmed, edited, created };

enum class EventKind { box_opened, box_confirmed, box_edited, box_created, box_deleted };

inline constexpr std::string_view to_string(BoxStatus s) {
  switch (s) {
    case BoxStatus::pre_annotated: return "pre_annotated";
    case BoxStatus::confirmed: return "confirmed";
    case BoxStatus::edited: return "edited";
    case BoxStatus::created: return "created";
  }
  return "pre_annotated";
}

inline constexpr std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::box_opened: return "box_opened";
    case EventKind::box_confirmed: return "box_confirmed";
    case EventKind::box_edited: return "box_edited";
    case EventKind::box_created: return "box_created";
    case EventKind::box_deleted: return "box_deleted";
  }
  return "box_opened";
}

inline std::optional<BoxStatus> parse_box_status(std::string_view s) {
  for (auto v : {BoxStatus::pre_annotated, BoxStatus::confirmed,
                 BoxStatus::edited, BoxStatus::created})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

inline std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (auto v : {EventKind::box_opened, EventKind::box_confirmed,
                 EventKind::box_edited, EventKind::box_created,
                 EventKind::box_deleted})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

struct SessionBox {
  std::string id;
  Box3D box;
  std::string class_label;
  BoxStatus status = BoxStatus::pre_annotated;

  bool operator==(const SessionBox&) const = default;
};

struct TimingEvent {
  EventKind kind = EventKind::box_opened;
  std::string box_id;
  double timestamp = 0.0;  // wall-clock seconds

  bool operator==(const TimingEvent&) const = default;
};

/// Annotator state for one frame: the working boxes and the timing log.
struct AnnotationSession {
  std::string frame_id;
  std::vector<SessionBox> boxes;
  std::vector<TimingEvent> timing_events;

  bool operator==(const AnnotationSession&) const = default;
};

/// Every broken invariant: duplicate ids, invalid boxes, timestamps going
/// backwards for a box id.
inline std::vector<FieldIssue> check_session(const AnnotationSession& s) {
  std::vector<FieldIssue> issues;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < s.boxes.size(); ++i) {
    const auto& b = s.boxes[i];
    const int idx = static_cast<int>(i);
    if (b.id.empty()) issues.push_back({idx, "id", "must not be empty"});
    if (!ids.insert(b.id).second)
      issues.push_back({idx, "id", "duplicate box id '" + b.id + "'"});
    if (auto issue = check_box(b.box)) {
      issue->index = idx;
      issues.push_back(*issue);
    }
  }
  std::map<std::string, double> last;
  for (std::size_t i = 0; i < s.timing_events.size(); ++i) {
    const auto& e = s.timing_events[i];
    const int idx = static_cast<int>(i);
    if (!std::isfinite(e.timestamp)) {
      issues.push_back({idx, "timestamp", "must be finite"});
      continue;
    }
    auto [it, inserted] = last.try_emplace(e.box_id, e.timestamp);
    if (!inserted) {
      if (e.timestamp < it->second)
        issues.push_back({idx, "timestamp",
                          "decreases for box id '" + e.box_id + "'"});
      else
        it->second = e.timestamp;
    }
  }
  return issues;
}

}  // namespace palf
