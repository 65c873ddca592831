#include "atc/agent/scripted.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <sstream>

#include <fmt/format.h>

namespace atc::agent {

std::string last_observation(const BackendRequest& request) {
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
        if (it->role == "tool") return it->content;
    }
    return {};
}

std::vector<std::pair<std::string, double>> parse_altitude_lines(const std::string& text) {
    static const std::regex line_re(R"(^([A-Z][A-Z0-9]*): Altitude ([0-9]+(?:\.[0-9]+)?) ft -> )");
    std::vector<std::pair<std::string, double>> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (std::regex_search(line, m, line_re)) out.emplace_back(m[1], std::stod(m[2]));
    }
    return out;
}

BackendRaw SequenceBackend::complete(const BackendRequest& request) {
    if (next_ >= steps_.size()) {
        return raw_text("No additional tools are needed; concluding.");
    }
    const ScriptedStep& step = steps_[next_];
    if (!step.expect_in_observation.empty() &&
        last_observation(request).find(step.expect_in_observation) == std::string::npos) {
        return raw_text(fmt::format(
            "Script guard failed at step {}: expected \"{}\" in the latest observation.", next_,
            step.expect_in_observation));
    }
    ++next_;
    if (step.call) return raw_tool_call(*step.call);
    return raw_text(step.text);
}

BackendRaw LayeringBackend::complete(const BackendRequest& request) {
    if (!queue_.empty()) {
        std::string cmd = queue_.front();
        queue_.pop_front();
        return raw_tool_call({"SENDCOMMAND", {{"command", cmd}}});
    }

    std::string obs = last_observation(request);
    if (obs.empty()) return raw_tool_call({"GETCONFLICTINFO", nlohmann::json::object()});
    if (obs.find("No conflicts detected.") != std::string::npos) {
        return raw_text("All conflicts resolved; aircraft hold separated levels.");
    }

    auto flights = parse_altitude_lines(obs);
    if (!flights.empty() && rounds_ < 3) {
        ++rounds_;
        std::sort(flights.begin(), flights.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second < b.second : a.first < b.first;
        });
        double anchor = std::round(flights.front().second / 100.0) * 100.0;
        for (std::size_t k = 0; k < flights.size(); ++k) {
            double level = anchor + spacing_ft_ * static_cast<double>(k);
            queue_.push_back(fmt::format("ALT {} {}", flights[k].first, level));
        }
        std::string cmd = queue_.front();
        queue_.pop_front();
        return raw_tool_call({"SENDCOMMAND", {{"command", cmd}}});
    }
    if (rounds_ >= 3 && !flights.empty()) {
        return raw_text("Layering rounds exhausted with conflicts still present.");
    }
    return raw_tool_call({"CONTINUEMONITORING", {{"duration", monitor_s_}}});
}

BackendRaw ExecutorBackend::complete(const BackendRequest& request) {
    const Message* brief = nullptr;
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
        if (it->role == "user") {
            brief = &*it;
            break;
        }
    }
    if (brief && brief->content != brief_) {
        brief_ = brief->content;
        queue_.clear();
        std::istringstream in(brief_);
        std::string line;
        while (std::getline(in, line)) {
            if (line.rfind("- ", 0) == 0) queue_.push_back(line.substr(2));
        }
    }
    if (!queue_.empty()) {
        std::string cmd = queue_.front();
        queue_.pop_front();
        return raw_tool_call({"SENDCOMMAND", {{"command", cmd}}});
    }
    return raw_text("All planned commands have been sent.");
}

} // namespace atc::agent
