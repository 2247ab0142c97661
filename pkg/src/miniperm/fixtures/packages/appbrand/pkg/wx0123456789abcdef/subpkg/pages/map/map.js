Page({
  onReady: function () {
    wx.getLocation({type: "gcj02", success: function (res) { render(res); }});
  }
});
