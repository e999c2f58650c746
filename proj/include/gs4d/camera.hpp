#pragma once

#include <stdexcept>
#include <vector>

#include "gs4d/quaternion.hpp"
#include "gs4d/types.hpp"

namespace gs4d {

// Pinhole camera, no distortion. Extrinsics map world to camera space.
struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  RigidTransform world_to_camera;

  void validate() const {
    if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("Camera: fx, fy must be > 0");
    if (width <= 0 || height <= 0) throw std::invalid_argument("Camera: bad image size");
  }

  Vec3 center() const {
    return -(world_to_camera.rotation.transpose() * world_to_camera.translation);
  }

  // Camera at `eye` looking at `target`, +z forward, with vertical FOV in radians.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y,
                        int width, int height) {
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fy = 0.5 * height / std::tan(0.5 * fov_y);
    cam.fx = cam.fy;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-9) right = forward.cross(Vec3(1, 0, 0));
    right.normalize();
    const Vec3 down = forward.cross(right);
    Mat3 r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    cam.world_to_camera.rotation = r;
    cam.world_to_camera.translation = -(r * eye);
    return cam;
  }
};

// N cameras on a horizontal ring of given radius, all looking at `target`.
std::vector<Camera> camera_ring(int count, double radius, double height, const Vec3& target,
                                double fov_y, int width, int image_height);

}  // namespace gs4d
