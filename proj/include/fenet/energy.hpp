#pragma once

// Duty-cycle energy simulator for wrist-worn devices. Charge (mAh) stands in
// for energy under the common-voltage assumption; the background current is
// battery capacity over standby runtime, and a monitoring run of T hours at
// duty cycle DC consumes (DC * I_PPG + I_BG) * T.

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "fenet/common.hpp"

namespace fenet {

struct DeviceProfile {
    std::string name;
    double capacity_mah = 0.0;
    double standby_hours = 0.0;

    void validate() const {
        require(capacity_mah > 0.0, ErrorKind::invalid_input,
                "DeviceProfile '" + name + "': capacity must be > 0");
        require(standby_hours > 0.0, ErrorKind::invalid_input,
                "DeviceProfile '" + name + "': standby runtime must be > 0");
    }
};

struct SensorProfile {
    std::string name;
    double current_ma = 0.0;  // I_PPG

    void validate() const {
        require(current_ma > 0.0, ErrorKind::invalid_input,
                "SensorProfile '" + name + "': working current must be > 0");
    }
};

struct EnergyScenario {
    DeviceProfile device;
    SensorProfile sensor;
    double hours = 8.0;      // T
    double duty_cycle = 1.0;  // DC in (0, 1]

    void validate() const {
        device.validate();
        sensor.validate();
        require(hours > 0.0, ErrorKind::invalid_input, "EnergyScenario: duration must be > 0");
        require(duty_cycle > 0.0 && duty_cycle <= 1.0, ErrorKind::invalid_input,
                "EnergyScenario: duty cycle must be in (0, 1]");
    }
};

// I_BG = capacity / standby runtime
inline double background_current(const DeviceProfile& device) {
    device.validate();
    return device.capacity_mah / device.standby_hours;
}

// C = (DC * I_PPG + I_BG) * T; DC = 1 reproduces C_STD = (I_PPG + I_BG) * T
inline double consumption_mah(double i_ppg, double i_bg, double duty_cycle, double hours) {
    return (duty_cycle * i_ppg + i_bg) * hours;
}

inline double consumption_mah(const EnergyScenario& s) {
    s.validate();
    return consumption_mah(s.sensor.current_ma, background_current(s.device), s.duty_cycle, s.hours);
}

// fraction of charge saved relative to the same run at full duty cycle
inline double savings_fraction(double i_ppg, double i_bg, double duty_cycle, double hours) {
    const double c_std = consumption_mah(i_ppg, i_bg, 1.0, hours);
    return (c_std - consumption_mah(i_ppg, i_bg, duty_cycle, hours)) / c_std;
}

// Devices and sensors used in the feasibility analysis.
inline std::vector<DeviceProfile> builtin_devices() {
    return {
        {"Apple Watch Series 6", 304.0, 18.0},
        {"Microsoft Band 2", 200.0, 48.0},
        {"Huawei Band 4", 91.0, 216.0},
        {"Mi Smart Band 5", 125.0, 336.0},
    };
}

inline std::vector<SensorProfile> builtin_sensors() {
    return {
        {"Green", 1.6},  // BH1790GLC-class green-LED module
        {"IR", 30.0},    // OB1203-class infra-red module
    };
}

struct FeasibilityRow {
    std::string device, sensor;
    double duty_cycle = 1.0;
    double consumption = 0.0;    // mAh over the run
    double capacity = 0.0;       // mAh
    bool feasible = false;       // consumption <= capacity
    double savings_fraction = 0.0;  // vs the same scenario at DC = 1
};

inline std::vector<FeasibilityRow> feasibility_report(const std::vector<DeviceProfile>& devices,
                                                      const std::vector<SensorProfile>& sensors,
                                                      double hours,
                                                      const std::vector<double>& duty_cycles) {
    require(!devices.empty() && !sensors.empty() && !duty_cycles.empty(), ErrorKind::invalid_input,
            "feasibility_report: empty inputs");
    std::vector<FeasibilityRow> rows;
    for (const DeviceProfile& dev : devices)
        for (const SensorProfile& sen : sensors) {
            const double i_bg = background_current(dev);
            for (double dc : duty_cycles) {
                FeasibilityRow row;
                row.device = dev.name;
                row.sensor = sen.name;
                row.duty_cycle = dc;
                row.consumption = consumption_mah(EnergyScenario{dev, sen, hours, dc});
                row.capacity = dev.capacity_mah;
                row.feasible = row.consumption <= dev.capacity_mah;
                row.savings_fraction = savings_fraction(sen.current_ma, i_bg, dc, hours);
                rows.push_back(row);
            }
        }
    return rows;
}

// ---------------------------------------------------------------------------
// Profile files: comma-separated rows
//   device,name,capacity_mah,standby_hours
//   sensor,name,current_ma
// ---------------------------------------------------------------------------

struct ProfileSet {
    std::vector<DeviceProfile> devices;
    std::vector<SensorProfile> sensors;
};

inline ProfileSet parse_profile_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "cannot open profile file: " + path);
    ProfileSet ps;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        const std::string at = path + ":" + std::to_string(lineno);
        auto f = split(s, ',');
        if (f[0] == "device") {
            require(f.size() == 4, ErrorKind::parse, at + ": device rows need 4 fields");
            DeviceProfile d{std::string(trim(f[1])), parse_double(f[2], at + " capacity"),
                            parse_double(f[3], at + " standby_hours")};
            d.validate();
            ps.devices.push_back(std::move(d));
        } else if (f[0] == "sensor") {
            require(f.size() == 3, ErrorKind::parse, at + ": sensor rows need 3 fields");
            SensorProfile sp{std::string(trim(f[1])), parse_double(f[2], at + " current")};
            sp.validate();
            ps.sensors.push_back(std::move(sp));
        } else {
            fail(ErrorKind::parse, at + ": row must start with 'device' or 'sensor'");
        }
    }
    require(!ps.devices.empty() || !ps.sensors.empty(), ErrorKind::format, path + ": no profile rows");
    return ps;
}

// Reported values are rounded to 0.1 mAh; internal arithmetic is not.
inline std::string feasibility_csv(const std::vector<FeasibilityRow>& rows) {
    std::ostringstream os;
    os << "device,sensor,duty_cycle,consumption_mah,capacity_mah,feasible,savings_vs_dc1\n";
    os << std::fixed;
    for (const FeasibilityRow& r : rows) {
        os << r.device << ',' << r.sensor << ',' << std::setprecision(6) << r.duty_cycle << ','
           << std::setprecision(1) << r.consumption << ',' << r.capacity << ','
           << (r.feasible ? "yes" : "no") << ',' << std::setprecision(4) << r.savings_fraction << "\n";
    }
    return os.str();
}

inline std::string feasibility_table(const std::vector<FeasibilityRow>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(22) << "device" << std::setw(8) << "sensor" << std::right << std::setw(8)
       << "DC" << std::setw(14) << "used (mAh)" << std::setw(16) << "capacity (mAh)" << std::setw(10)
       << "feasible" << std::setw(10) << "saved" << "\n";
    os << std::fixed;
    for (const FeasibilityRow& r : rows) {
        os << std::left << std::setw(22) << r.device << std::setw(8) << r.sensor << std::right
           << std::setw(8) << std::setprecision(3) << r.duty_cycle << std::setw(14) << std::setprecision(1)
           << r.consumption << std::setw(16) << r.capacity << std::setw(10) << (r.feasible ? "yes" : "no")
           << std::setw(9) << std::setprecision(1) << 100.0 * r.savings_fraction << "%\n";
    }
    return os.str();
}

}  // namespace fenet
