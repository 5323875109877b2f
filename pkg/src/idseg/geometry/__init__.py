from .contours import (
    extract_contours,
    refine_corners,
    select_document_quad,
    simplify_polygon,
    simplify_polyline,
    threshold_map,
)
from .polygon import (
    NotConvexError,
    as_quad,
    convex_clip,
    exact_iou,
    is_convex,
    orient_ccw,
    points_in_polygon,
    polygon_area,
    polygon_perimeter,
    quad_iou,
    raster_iou,
    rasterize_polygon,
    signed_area,
)
